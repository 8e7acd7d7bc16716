//! Static per-attempt step bounds derived from the control-flow of each machine.

use serde::Serialize;

use super::{ConsChoice, ProgramId, ProgramParams};

/// Maximum number of ordinary steps any single attempt can take.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct AlgoBound {
    pub program: ProgramId,
    pub n: usize,
    pub f: u32,
    #[serde(rename = "B")]
    pub steps: u32,
}

fn inner_steps(cons: ConsChoice) -> u32 {
    match cons {
        ConsChoice::Atomic => 1,
        ConsChoice::Tas => 3,
    }
}

/// Counts the longest path through one attempt.
///
/// fig1 has no loops: the fresh path is two guard reads, the announce, the
/// inner consensus, the `D` write and the return; the recovery path is two
/// guard reads, the `D` read and up to five more reads, the last one
/// returning. fig2 iteration `k` costs the claim read and increment, `k`
/// adoption reads, the inner consensus, the `D[k]` write and, while `k < f`,
/// two reads per other process; one more step returns.
pub fn static_bound(params: &ProgramParams) -> AlgoBound {
    let c = inner_steps(params.cons);
    let f = params.f;
    let steps = match params.id {
        ProgramId::Fig1 => (2 + 1 + c + 1 + 1).max(2 + 1 + 5),
        ProgramId::Fig2 => {
            let n = params.n as u32;
            (f + 1) * (3 + c) + f * (f + 1) / 2 + 2 * f * (n - 1) + 1
        }
        ProgramId::Fig3 => 5,
        ProgramId::CasRc | ProgramId::ConsBase => 2,
        ProgramId::TasCons2 => 3,
    };
    AlgoBound { program: params.id, n: params.n, f, steps }
}
