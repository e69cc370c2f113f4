/* tslint:disable */
/* eslint-disable */

/**
 * Hypothesis check and tuning from `(μ, ‖X‖², p)` alone.
 */
export function certify_scalars(mu: number, op_norm_sq: number, p: number, r: number, alpha: number, s: number): string;

/**
 * Our caps on `(C_s, C_μ)` beside the competing constants.
 */
export function constants(alpha: number, r: number): string;

/**
 * Empirical `P(‖X_TᵗX_T − I‖ ≥ r)` on `k` thresholds in `(0, r_max]` for
 * a seeded `gaussian_unit(n, p)` matrix.
 */
export function failure_curve(n: number, p: number, s: number, r_max: number, k: number, trials: number, seed: number): string;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly certify_scalars: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number];
    readonly constants: (a: number, b: number) => [number, number];
    readonly failure_curve: (a: number, b: number, c: number, d: number, e: number, f: number, g: number) => [number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
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
