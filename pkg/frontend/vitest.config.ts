import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    include: ["test/**/*.test.ts"],
    environment: "node",
    // each test spawns a real `adl serve` child and drives it to completion
    testTimeout: 120_000,
    hookTimeout: 60_000,
    fileParallelism: false,
  },
});
