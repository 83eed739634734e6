export * from "./arch.js";
export * from "./dataset.js";
export * from "./export.js";
export * from "./gemm.js";
export * from "./loss.js";
export * from "./network.js";
export * from "./oarr.js";
export * from "./ops.js";
export * from "./optimizer.js";
export * from "./png.js";
export * from "./tensor.js";
export * from "./train.js";
