/* tslint:disable */
/* eslint-disable */

/**
 * A refined noisy plane pair.
 */
export class RefineRun {
    private constructor();
    free(): void;
    [Symbol.dispose](): void;
    /**
     * Reference depth before (`refined = false`) or after refinement, as
     * RGBA over `[lo, hi]`.
     */
    depth_image(refined: boolean, lo: number, hi: number): Uint8Array;
    /**
     * Pyramid level of each entry of `totals`.
     */
    levels(): Uint32Array;
    residual_after(): number;
    residual_before(): number;
    /**
     * Total loss after every optimizer step, coarse level first.
     */
    totals(): Float64Array;
}

/**
 * Distorts the source view of a plane pair by `scale` and `shift`, mixes in
 * outlier matches, and aligns it back. Returns a JSON report.
 */
export function align_scene(scale: number, sx: number, sy: number, sz: number, outlier_fraction: number, seed: bigint): string;

/**
 * RGBA image of the reference-view normals of a synthetic surface, with
 * each component mapped from [-1, 1] to [0, 255]. Invalid pixels are
 * transparent.
 *
 * `param` is the tilt in degrees for `plane`, the interior angle for
 * `two_planes`, the radius for `sphere` and the step height for
 * `staircase`.
 */
export function normal_image(surface_name: string, param: number, noise: number, seed: bigint): Uint8Array;

/**
 * Generates a noisy plane pair and refines it with the given weights.
 */
export function refine_scene(noise: number, iters_per_level: number, lambda_p: number, lambda_r: number, lambda_s: number, lambda_n: number, seed: bigint): RefineRun;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_refinerun_free: (a: number, b: number) => void;
    readonly align_scene: (a: number, b: number, c: number, d: number, e: number, f: bigint) => [number, number, number, number];
    readonly normal_image: (a: number, b: number, c: number, d: number, e: bigint) => [number, number, number, number];
    readonly refine_scene: (a: number, b: number, c: number, d: number, e: number, f: number, g: bigint) => [number, number, number];
    readonly refinerun_depth_image: (a: number, b: number, c: number, d: number) => [number, number];
    readonly refinerun_levels: (a: number) => [number, number];
    readonly refinerun_residual_after: (a: number) => number;
    readonly refinerun_residual_before: (a: number) => number;
    readonly refinerun_totals: (a: number) => [number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __externref_table_dealloc: (a: number) => void;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
    readonly __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
    readonly __wbindgen_start: () => void;
}

export type SyncInitInput = BufferSource | WebAssembly.Module;

/**
 * Instantiates the given `module`, which can either be bytes or
 * a precompiled `WebAssembly.Module`.
 *
 * @param {{ module: SyncInitInput }} module - Passing `SyncInitInput` directly is deprecated.
 *
 * @returns {InitOutput}
 */
export function initSync(module: { module: SyncInitInput } | SyncInitInput): InitOutput;

/**
 * If `module_or_path` is {RequestInfo} or {URL}, makes a request and
 * for everything else, calls `WebAssembly.instantiate` directly.
 *
 * @param {{ module_or_path: InitInput | Promise<InitInput> }} module_or_path - Passing `InitInput` directly is deprecated.
 *
 * @returns {Promise<InitOutput>}
 */
export default function __wbg_init (module_or_path?: { module_or_path: InitInput | Promise<InitInput> } | InitInput | Promise<InitInput>): Promise<InitOutput>;
