/* tslint:disable */
/* eslint-disable */

/**
 * Wang–Tsiatis boundaries as `[f_1..f_J, e_1..e_J]`.
 */
export function boundaries(constant: number, stages: number, shape: number): Float64Array;

/**
 * Conditional power over `steps` evenly spaced interim statistics in
 * `[z_from, z_to]`, followed by the interim boundaries for `cp_lower` and
 * `cp_upper`: `[cp_1..cp_steps, f, e]`. Stage sizes are `n` and `2n` with unit variance.
 */
export function cp_curve(r: number, per_stage: number, delta1: number, cp_lower: number, cp_upper: number, z_from: number, z_to: number, steps: number): Float64Array;

/**
 * Rejection probability of a two-outcome, three-stage, 1-of-2 design over a
 * `steps x steps` grid of true effects on `[0, mu_max]^2`.
 *
 * `C` is calibrated to `alpha` first. Returns `[C, p(0,0), p(0,h), ...]`
 * with the second effect varying fastest.
 */
export function rejection_surface(per_stage: number, rho: number, alpha: number, nsims: number, seed: bigint, mu_max: number, steps: number): Float64Array;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly boundaries: (a: number, b: number, c: number) => [number, number, number, number];
    readonly cp_curve: (a: number, b: number, c: number, d: number, e: number, f: number, g: number, h: number) => [number, number, number, number];
    readonly rejection_surface: (a: number, b: number, c: number, d: number, e: bigint, f: number, g: number) => [number, number, number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __externref_table_dealloc: (a: number) => void;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
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
