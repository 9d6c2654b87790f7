import { defineConfig } from "vitest/config";

// e2e spawns the Python service; opt in with VAX_E2E=1 (npm run test:e2e).
export default defineConfig({
  test: {
    exclude: [
      "**/node_modules/**",
      "**/dist/**",
      ...(process.env.VAX_E2E ? [] : ["tests/e2e.test.ts"]),
    ],
  },
});
