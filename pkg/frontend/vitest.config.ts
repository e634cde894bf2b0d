import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    include: ["test/**/*.test.ts"],
    // the round-trip test trains a tiny model through the python CLI
    // before it can talk to the service, which dominates the run time
    testTimeout: 240_000,
    hookTimeout: 240_000,
  },
});
