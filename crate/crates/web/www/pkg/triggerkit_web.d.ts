/* tslint:disable */
/* eslint-disable */

/**
 * Thinned state-norm curve plus the full list of transmission times.
 */
export class SimulationView {
    private constructor();
    free(): void;
    [Symbol.dispose](): void;
    readonly events: Float64Array;
    readonly norms: Float64Array;
    readonly times: Float64Array;
}

export function etcFrontier(g: number, taus: Float64Array): Float64Array;

export function simulate(kind: string, g: number, r: number, eps: number, param: number, t_end: number): SimulationView;

export function stmCurve(r: number, eps: number, tau_max: number, taus: Float64Array): Float64Array;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_simulationview_free: (a: number, b: number) => void;
    readonly etcFrontier: (a: number, b: number, c: number) => [number, number, number, number];
    readonly simulate: (a: number, b: number, c: number, d: number, e: number, f: number, g: number) => [number, number, number];
    readonly simulationview_events: (a: number) => [number, number];
    readonly simulationview_norms: (a: number) => [number, number];
    readonly simulationview_times: (a: number) => [number, number];
    readonly stmCurve: (a: number, b: number, c: number, d: number, e: number) => [number, number, number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
    readonly __externref_table_dealloc: (a: number) => void;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
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
