import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    include: ["test/integration.test.ts"],
    globalSetup: ["test/globalSetup.ts"],
    testTimeout: 180_000,
    hookTimeout: 180_000,
    fileParallelism: false,
  },
});
