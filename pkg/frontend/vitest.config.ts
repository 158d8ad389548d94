import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    include: ["tests/**/*.test.ts"],
    // the e2e suite spawns a real dataset + server before its first test
    hookTimeout: 120_000,
    testTimeout: 30_000,
  },
});
