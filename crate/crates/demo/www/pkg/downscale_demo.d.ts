/* tslint:disable */
/* eslint-disable */

export class Panels {
    private constructor();
    free(): void;
    [Symbol.dispose](): void;
    count(): number;
    /**
     * Signed data that should use a colour map centred on zero.
     */
    diverging(i: number): boolean;
    label(i: number): string;
    side(i: number): number;
    summary(): string;
    /**
     * Row-major values of panel `i`.
     */
    values(i: number): Float32Array;
}

/**
 * Pools a synthetic field by `scale`, upsamples it again with bicubic
 * interpolation and shows what the interpolation cannot recover.
 */
export function downscale_error(kind: string, size: number, scale: number, seed: bigint): Panels;

/**
 * Keeps only Fourier modes with |ky|, |kx| < `modes` (the band an FNO
 * layer with that many modes sees) and shows the reconstruction.
 */
export function spectral_truncation(kind: string, size: number, modes: number, seed: bigint): Panels;

/**
 * `count` consecutive fields of a synthetic product.
 */
export function synthetic_gallery(kind: string, size: number, seed: bigint, count: number, beta: number): Panels;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_panels_free: (a: number, b: number) => void;
    readonly downscale_error: (a: number, b: number, c: number, d: number, e: bigint) => [number, number, number];
    readonly panels_count: (a: number) => number;
    readonly panels_diverging: (a: number, b: number) => number;
    readonly panels_label: (a: number, b: number) => [number, number];
    readonly panels_side: (a: number, b: number) => number;
    readonly panels_summary: (a: number) => [number, number];
    readonly panels_values: (a: number, b: number) => [number, number];
    readonly spectral_truncation: (a: number, b: number, c: number, d: number, e: bigint) => [number, number, number];
    readonly synthetic_gallery: (a: number, b: number, c: number, d: bigint, e: number, f: number) => [number, number, number];
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
