/* tslint:disable */
/* eslint-disable */

export class Demo {
    free(): void;
    [Symbol.dispose](): void;
    constraint(): number;
    converged(): boolean;
    height(): number;
    iteration(): number;
    constructor(preset_id: string, scheme: string, beta: number, scale: number);
    objective_ratio(): number;
    /**
     * Grayscale raster of the current layout, top row first.
     */
    raster(): Uint8Array;
    step(n: number): boolean;
    volume_fraction(): number;
    width(): number;
}

/**
 * `arsinh(γx)/γ` sampled at `n` points on [-extent, extent].
 */
export function arsinh_curve(gamma: number, extent: number, n: number): Float64Array;

/**
 * `Θ(φ)` sampled at `n` points on [-1, 1].
 */
export function heaviside_curve(beta: number, n: number): Float64Array;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_demo_free: (a: number, b: number) => void;
    readonly arsinh_curve: (a: number, b: number, c: number) => [number, number];
    readonly demo_constraint: (a: number) => number;
    readonly demo_converged: (a: number) => number;
    readonly demo_height: (a: number) => number;
    readonly demo_iteration: (a: number) => number;
    readonly demo_new: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number];
    readonly demo_objective_ratio: (a: number) => number;
    readonly demo_raster: (a: number) => [number, number];
    readonly demo_step: (a: number, b: number) => [number, number, number];
    readonly demo_volume_fraction: (a: number) => number;
    readonly demo_width: (a: number) => number;
    readonly heaviside_curve: (a: number, b: number) => [number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
    readonly __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
    readonly __externref_table_dealloc: (a: number) => void;
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
