/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_refinerun_free: (a: number, b: number) => void;
export const align_scene: (a: number, b: number, c: number, d: number, e: number, f: bigint) => [number, number, number, number];
export const normal_image: (a: number, b: number, c: number, d: number, e: bigint) => [number, number, number, number];
export const refine_scene: (a: number, b: number, c: number, d: number, e: number, f: number, g: bigint) => [number, number, number];
export const refinerun_depth_image: (a: number, b: number, c: number, d: number) => [number, number];
export const refinerun_levels: (a: number) => [number, number];
export const refinerun_residual_after: (a: number) => number;
export const refinerun_residual_before: (a: number) => number;
export const refinerun_totals: (a: number) => [number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_malloc: (a: number, b: number) => number;
export const __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
export const __wbindgen_start: () => void;
