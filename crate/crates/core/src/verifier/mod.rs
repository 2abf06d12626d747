//! Machine checks of the lemmas and algebraic identities used below the first
//! critical level: exact rational arithmetic for polynomial identities, fine
//! grids for the transcendental inequalities.

mod lemmas;
mod poly;

pub use lemmas::{
    refinement_stability, verify_all, verify_appendix, verify_cortra, verify_h_claim, verify_one,
    verify_tra1, verify_tra2, verify_tra3, verify_w_final, w_final_display, w_final_simplified,
    w_maximizer_cos, LemmaCheck, LemmaReport, StabilityRow, VerificationLedger, VerifierOptions,
    CORTRA_OFFSETS, LEMMA_IDS,
};
pub use poly::{
    h_prime_exact, polynomial_identities, rational, shifted_quartic_max, IdentityCheck,
    RationalPolynomial, DISPLAY_ONLY,
};
