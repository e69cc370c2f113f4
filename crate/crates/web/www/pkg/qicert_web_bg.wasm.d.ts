/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const certify_scalars: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number];
export const constants: (a: number, b: number) => [number, number];
export const failure_curve: (a: number, b: number, c: number, d: number, e: number, f: number, g: number) => [number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_start: () => void;
