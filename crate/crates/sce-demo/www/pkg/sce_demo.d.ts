/* tslint:disable */
/* eslint-disable */

/**
 * Rows of `[tau, E_quantum, E_oracle]` over the configured grid.
 */
export function exact_curve(cfg: string): Float64Array;

/**
 * Rows of `[re, im, structure]` at `tau`; `structure` is -1 when the root
 * belongs to none.
 */
export function root_atlas(cfg: string, tau: number): Float64Array;

/**
 * Rows of `[tau, E_quantum, E_real, E_st1, ..., E_stK]` with
 * `K = structure_count`.
 */
export function semiclassical_curves(cfg: string): Float64Array;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly exact_curve: (a: number, b: number) => [number, number, number, number];
    readonly root_atlas: (a: number, b: number, c: number) => [number, number, number, number];
    readonly semiclassical_curves: (a: number, b: number) => [number, number, number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
    readonly __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
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
