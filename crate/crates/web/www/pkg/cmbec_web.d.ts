/* tslint:disable */
/* eslint-disable */

export class Ensemble {
    private constructor();
    free(): void;
    [Symbol.dispose](): void;
    readonly eta: number;
    readonly eta_err: number;
    /**
     * `g2(x, 0)` in the measured run; `NaN` where the density is too thin to trust.
     */
    readonly g2: Float64Array;
    readonly g2_err: Float64Array;
    readonly n_meas: Float64Array;
    readonly n_meas_err: Float64Array;
    readonly n_nomeas: Float64Array;
    readonly n_nomeas_err: Float64Array;
    readonly total_number: number;
    readonly x: Float64Array;
}

export class Profile {
    private constructor();
    free(): void;
    [Symbol.dispose](): void;
    readonly chemical_potential: number;
    readonly density: Float64Array;
    readonly variance: number;
    readonly x: Float64Array;
}

export class Spreading {
    private constructor();
    free(): void;
    [Symbol.dispose](): void;
    readonly eta: number;
    readonly times: Float64Array;
    readonly var_meas: Float64Array;
    readonly var_nomeas: Float64Array;
    readonly within_validity: boolean;
}

/**
 * Gross-Pitaevskii ground-state density for interaction strength `g1D N`.
 */
export function ground_state(g1d_n: number): Profile;

/**
 * Mean-field cloud width with and without measurement up to `t_final`.
 */
export function meanfield_spreading(g1d_n: number, kappa_tilde: number, t_final: number): Spreading;

/**
 * Positive-P densities at a quarter trap period with and without measurement.
 */
export function positivep_quarter_period(g1d_n: number, kappa_tilde: number, trajectories: number, seed: number): Ensemble;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_ensemble_free: (a: number, b: number) => void;
    readonly __wbg_profile_free: (a: number, b: number) => void;
    readonly __wbg_spreading_free: (a: number, b: number) => void;
    readonly ensemble_eta: (a: number) => number;
    readonly ensemble_eta_err: (a: number) => number;
    readonly ensemble_g2: (a: number) => [number, number];
    readonly ensemble_g2_err: (a: number) => [number, number];
    readonly ensemble_n_meas: (a: number) => [number, number];
    readonly ensemble_n_meas_err: (a: number) => [number, number];
    readonly ensemble_n_nomeas: (a: number) => [number, number];
    readonly ensemble_n_nomeas_err: (a: number) => [number, number];
    readonly ensemble_total_number: (a: number) => number;
    readonly ensemble_x: (a: number) => [number, number];
    readonly ground_state: (a: number) => [number, number, number];
    readonly meanfield_spreading: (a: number, b: number, c: number) => [number, number, number];
    readonly positivep_quarter_period: (a: number, b: number, c: number, d: number) => [number, number, number];
    readonly profile_chemical_potential: (a: number) => number;
    readonly profile_density: (a: number) => [number, number];
    readonly profile_variance: (a: number) => number;
    readonly profile_x: (a: number) => [number, number];
    readonly spreading_eta: (a: number) => number;
    readonly spreading_times: (a: number) => [number, number];
    readonly spreading_var_meas: (a: number) => [number, number];
    readonly spreading_var_nomeas: (a: number) => [number, number];
    readonly spreading_within_validity: (a: number) => number;
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
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
