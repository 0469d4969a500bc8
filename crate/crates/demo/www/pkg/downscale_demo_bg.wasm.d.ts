/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_panels_free: (a: number, b: number) => void;
export const downscale_error: (a: number, b: number, c: number, d: number, e: bigint) => [number, number, number];
export const panels_count: (a: number) => number;
export const panels_diverging: (a: number, b: number) => number;
export const panels_label: (a: number, b: number) => [number, number];
export const panels_side: (a: number, b: number) => number;
export const panels_summary: (a: number) => [number, number];
export const panels_values: (a: number, b: number) => [number, number];
export const spectral_truncation: (a: number, b: number, c: number, d: number, e: bigint) => [number, number, number];
export const synthetic_gallery: (a: number, b: number, c: number, d: bigint, e: number, f: number) => [number, number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __wbindgen_malloc: (a: number, b: number) => number;
export const __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_start: () => void;
