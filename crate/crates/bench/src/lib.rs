//! Empty library crate; the interesting code lives in `benches/dsp.rs`,
//! which exercises the simulator's per-sample hot path under criterion.
