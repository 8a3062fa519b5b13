mod common;

use berth_core::agent::{AgentConfig, PsiEncoding};
use common::{gradient_check_draw, REL_TOL};

fn small(psi_encoding: PsiEncoding) -> AgentConfig {
    AgentConfig {
        hl_size: 6,
        lstm_size: 5,
        history_len: 3,
        psi_encoding,
        ..Default::default()
    }
}

#[test]
fn small_agent_gradients_match_finite_differences() {
    for seed in 0..100 {
        let c = gradient_check_draw(small(PsiEncoding::SinCos), seed);
        assert_eq!(c.failures, 0, "seed {seed}: {c:?}");
        assert!(c.max_rel < REL_TOL);
    }
}

#[test]
fn raw_heading_encoding_gradients_match() {
    for seed in 100..120 {
        let c = gradient_check_draw(small(PsiEncoding::Raw), seed);
        assert_eq!(c.failures, 0, "seed {seed}: {c:?}");
    }
}
