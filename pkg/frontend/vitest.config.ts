import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    // DOM tests opt in per-file; the rest read fixture files and want node
    environment: "node",
    include: ["test/**/*.test.ts"],
  },
});
