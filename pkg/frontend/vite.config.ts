import { defineConfig } from "vite";

// The interactive service owns all geometry; the dev server just proxies
// API calls to it (default `tubetrack serve` port).
export default defineConfig({
  server: {
    proxy: {
      "/sessions": "http://127.0.0.1:8021",
    },
  },
  test: {
    environment: "node",
  },
});
