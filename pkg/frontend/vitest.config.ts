import { defineConfig } from 'vitest/config';

export default defineConfig({
  test: {
    // the parity suite boots the real ingestion service in a subprocess
    testTimeout: 120_000,
    hookTimeout: 120_000,
  },
});
