//! Response-probability models (3PL, DINA), response simulation, ability
//! estimation, DINA EM calibration, and the adaptive-testing loop.

mod cat;
mod dina;
mod irt;

pub use cat::{run_cat, select_next_item, CatConfig, CatTranscript, StopReason, ThetaGrid};
pub use dina::{
    eta_ideal, fit_dina_em, p_dina, simulate_responses, DinaEmConfig, DinaFit, ItemParamsDINA,
};
pub use irt::{estimate_theta_eap, fisher_information, p_3pl, ItemParams3PL};
