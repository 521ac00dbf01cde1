//! Label-switching correction, point estimates, convergence diagnostics,
//! posterior predictive checks and summaries.

mod diagnostics;
mod drawio;
mod ppc;
mod relabel;
mod summary;

pub use diagnostics::{geweke_z, mode_label, quantile_sorted, GEWEKE_FIRST, GEWEKE_LAST, GEWEKE_MIN_LEN};
pub use drawio::{read_draws, write_draws, write_permutations_csv, BETA_FILE, LABELS_FILE, LAYOUT_FILE, PARAMS_FILE, PROB_FILE};
pub use ppc::{bayes_pvalue, chi2_discrepancy, fitted_eta, posterior_predictive_check, ppc_replicate, sample_response, PpcResult};
pub use relabel::{permute_draw, relabel_stephens, RelabeledDraws};
pub use summary::{
    param_slots, point_estimate_mode, scalar_parameters, summarize, summarize_values, write_clusters_csv, write_summary_json,
    write_trace_csv, ClusteringResult, ModeEstimate, ParamSlot, ParamSummary,
};
