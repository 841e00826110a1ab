// SPDX-License-Identifier: Apache-2.0
//! Pipeline computation redundancy for the NPC and SA stages.
//!
//! Each computation runs twice on frozen inputs. A mismatch triggers a third
//! run and a 2-of-3 vote, costing one extra cycle for the whole flit.

/// Which computation instance (1, 2 or 3) a soft error corrupts, if any.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SoftErrorHooks {
    pub npc: Option<u8>,
    pub sa: Option<u8>,
}

impl SoftErrorHooks {
    pub const NONE: SoftErrorHooks = SoftErrorHooks { npc: None, sa: None };
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PcrStage<T> {
    pub first_result: T,
    pub second_result: Option<T>,
    pub third_result: Option<T>,
    pub mismatch: bool,
    pub voted_result: Option<T>,
}

impl<T> PcrStage<T> {
    pub fn result(&self) -> &T {
        self.voted_result.as_ref().unwrap_or(&self.first_result)
    }

    pub fn into_result(self) -> T {
        self.voted_result.unwrap_or(self.first_result)
    }
}

/// 2-of-3 majority. Three distinct values cannot arise from a single upset.
pub fn majority<T: PartialEq + Clone>(a: &T, b: &T, c: &T) -> T {
    if a == b || a == c {
        a.clone()
    } else if b == c {
        b.clone()
    } else {
        panic!("PCR vote: all three computations disagree");
    }
}

fn instance<T>(k: u8, hook: Option<u8>, compute: &impl Fn() -> T, corrupt: &impl Fn(T) -> T) -> T {
    let v = compute();
    if hook == Some(k) {
        corrupt(v)
    } else {
        v
    }
}

/// Run one computation under redundancy.
pub fn redundant<T: PartialEq + Clone>(
    compute: impl Fn() -> T,
    hook: Option<u8>,
    corrupt: impl Fn(T) -> T,
) -> PcrStage<T> {
    let first = instance(1, hook, &compute, &corrupt);
    let second = instance(2, hook, &compute, &corrupt);
    if first == second {
        return PcrStage {
            first_result: first,
            second_result: Some(second),
            third_result: None,
            mismatch: false,
            voted_result: None,
        };
    }
    let third = instance(3, hook, &compute, &corrupt);
    let voted = majority(&first, &second, &third);
    PcrStage {
        first_result: first,
        second_result: Some(second),
        third_result: Some(third),
        mismatch: true,
        voted_result: Some(voted),
    }
}

/// Run once with no checking.
pub fn single<T>(compute: impl Fn() -> T, hook: Option<u8>, corrupt: impl Fn(T) -> T) -> PcrStage<T> {
    PcrStage {
        first_result: instance(1, hook, &compute, &corrupt),
        second_result: None,
        third_result: None,
        mismatch: false,
        voted_result: None,
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PcrOutcome<N, G> {
    pub npc: PcrStage<N>,
    pub sa: PcrStage<G>,
    /// Cycles the NPC/SA stage is occupied by this flit.
    pub cycles_consumed: u8,
}

impl<N, G> PcrOutcome<N, G> {
    pub fn npc_result(&self) -> &N {
        self.npc.result()
    }

    pub fn sa_result(&self) -> &G {
        self.sa.result()
    }
}

/// Compute NPC and SA for one flit. With `enabled`, both run redundantly
/// and the stage takes 2 cycles, 3 when either needs a vote; otherwise a
/// single unchecked run taking 1 cycle.
#[allow(clippy::too_many_arguments)]
pub fn pcr_execute<N, G>(
    enabled: bool,
    npc: impl Fn() -> N,
    sa: impl Fn() -> G,
    hooks: SoftErrorHooks,
    corrupt_npc: impl Fn(N) -> N,
    corrupt_sa: impl Fn(G) -> G,
) -> PcrOutcome<N, G>
where
    N: PartialEq + Clone,
    G: PartialEq + Clone,
{
    if !enabled {
        return PcrOutcome {
            npc: single(npc, hooks.npc, corrupt_npc),
            sa: single(sa, hooks.sa, corrupt_sa),
            cycles_consumed: 1,
        };
    }
    let npc = redundant(npc, hooks.npc, corrupt_npc);
    let sa = redundant(sa, hooks.sa, corrupt_sa);
    let cycles_consumed = if npc.mismatch || sa.mismatch { 3 } else { 2 };
    PcrOutcome { npc, sa, cycles_consumed }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(hooks: SoftErrorHooks) -> PcrOutcome<u8, u8> {
        pcr_execute(true, || 5u8, || 0b0010u8, hooks, |v| v ^ 0x40, |g| g ^ 0x01)
    }

    #[test]
    fn clean_takes_two_cycles() {
        let o = run(SoftErrorHooks::NONE);
        assert_eq!((*o.npc_result(), *o.sa_result(), o.cycles_consumed), (5, 0b0010, 2));
        assert!(o.npc.voted_result.is_none());
    }

    #[test]
    fn npc_first_instance_upset_is_voted_out() {
        let o = run(SoftErrorHooks { npc: Some(1), sa: None });
        assert!(o.npc.mismatch);
        assert_eq!(o.npc.third_result, Some(5));
        assert_eq!(*o.npc_result(), 5);
        assert_eq!(o.cycles_consumed, 3);
    }

    #[test]
    fn sa_second_instance_upset_halts_whole_flit() {
        let o = run(SoftErrorHooks { npc: None, sa: Some(2) });
        assert!(!o.npc.mismatch);
        assert!(o.sa.mismatch);
        assert_eq!(*o.sa_result(), 0b0010);
        assert_eq!(o.cycles_consumed, 3);
    }

    #[test]
    fn third_instance_upset_is_unobservable() {
        // The third run only happens after a mismatch.
        let o = run(SoftErrorHooks { npc: Some(3), sa: None });
        assert_eq!(o.cycles_consumed, 2);
    }

    #[test]
    fn disabled_passes_corruption_through() {
        let o = pcr_execute(false, || 5u8, || 1u8, SoftErrorHooks { npc: Some(1), sa: None }, |v| v ^ 1, |g| g);
        assert_eq!(*o.npc_result(), 4);
        assert_eq!(o.cycles_consumed, 1);
    }

    #[test]
    #[should_panic(expected = "disagree")]
    fn triple_disagreement_asserts() {
        majority(&1, &2, &3);
    }
}
