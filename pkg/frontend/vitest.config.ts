import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    include: ["test/**/*.test.ts"],
    // the training-contract test performs a real 50-epoch run
    testTimeout: 600_000,
    hookTimeout: 120_000,
    pool: "forks",
  },
});
