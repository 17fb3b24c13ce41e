/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_ensemble_free: (a: number, b: number) => void;
export const __wbg_profile_free: (a: number, b: number) => void;
export const __wbg_spreading_free: (a: number, b: number) => void;
export const ensemble_eta: (a: number) => number;
export const ensemble_eta_err: (a: number) => number;
export const ensemble_g2: (a: number) => [number, number];
export const ensemble_g2_err: (a: number) => [number, number];
export const ensemble_n_meas: (a: number) => [number, number];
export const ensemble_n_meas_err: (a: number) => [number, number];
export const ensemble_n_nomeas: (a: number) => [number, number];
export const ensemble_n_nomeas_err: (a: number) => [number, number];
export const ensemble_total_number: (a: number) => number;
export const ensemble_x: (a: number) => [number, number];
export const ground_state: (a: number) => [number, number, number];
export const meanfield_spreading: (a: number, b: number, c: number) => [number, number, number];
export const positivep_quarter_period: (a: number, b: number, c: number, d: number) => [number, number, number];
export const profile_chemical_potential: (a: number) => number;
export const profile_density: (a: number) => [number, number];
export const profile_variance: (a: number) => number;
export const profile_x: (a: number) => [number, number];
export const spreading_eta: (a: number) => number;
export const spreading_times: (a: number) => [number, number];
export const spreading_var_meas: (a: number) => [number, number];
export const spreading_var_nomeas: (a: number) => [number, number];
export const spreading_within_validity: (a: number) => number;
export const __wbindgen_externrefs: WebAssembly.Table;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_start: () => void;
