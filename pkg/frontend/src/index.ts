export * from "./types.js";
export * from "./api.js";
export * from "./context.js";
export * from "./queries.js";
export * from "./chart.js";
export * from "./map.js";
export * from "./topology.js";
export * from "./sliders.js";
export * from "./dashboard.js";
