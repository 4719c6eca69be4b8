//! Analytic receptive-field arithmetic over a convolution stack.
//!
//! The static rule folds `rf' = rf + (kernel - 1) * jump`, `jump' = jump *
//! stride` over the layers. Deformable layers are modeled as an interval: the
//! effective kernel extent of a layer with offset magnitude bound `m` ranges
//! over `[kernel, kernel + 2m]`, so the stack maps to a min/max pair of
//! receptive fields instead of a single value.

use crate::error::{Error, Result};

/// One convolution layer. `max_offset` is zero for an ordinary convolution
/// and bounds the learned offset magnitude of a deformable one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvSpec {
    pub kernel: u32,
    pub stride: u32,
    pub padding: u32,
    pub max_offset: f64,
}

impl ConvSpec {
    /// An ordinary convolution; the kernel must be odd.
    pub fn new(kernel: u32, stride: u32, padding: u32) -> Result<Self> {
        if kernel == 0 || kernel % 2 == 0 {
            return Err(Error::Contract(format!(
                "kernel size must be odd and positive, got {kernel}"
            )));
        }
        if stride == 0 {
            return Err(Error::Contract("stride must be at least 1".into()));
        }
        Ok(Self {
            kernel,
            stride,
            padding,
            max_offset: 0.0,
        })
    }

    /// Marks the layer deformable with the given offset magnitude bound.
    pub fn with_max_offset(mut self, max_offset: f64) -> Result<Self> {
        if !max_offset.is_finite() || max_offset < 0.0 {
            return Err(Error::Contract(format!(
                "max offset must be finite and >= 0, got {max_offset}"
            )));
        }
        self.max_offset = max_offset;
        Ok(self)
    }
}

/// Receptive-field extent and effective input stride of one feature cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RfState {
    /// Extent in input pixels. Fractional under deformable bounds.
    pub rf: f64,
    /// Input pixels between adjacent output cells.
    pub jump: f64,
}

impl RfState {
    /// The single-pixel identity state `(rf = 1, jump = 1)`.
    pub const INITIAL: RfState = RfState { rf: 1.0, jump: 1.0 };

    pub fn new(rf: f64, jump: f64) -> Result<Self> {
        if !(rf >= 1.0) || !(jump >= 1.0) || !rf.is_finite() || !jump.is_finite() {
            return Err(Error::Contract(format!(
                "receptive field state needs rf >= 1 and jump >= 1, got ({rf}, {jump})"
            )));
        }
        Ok(Self { rf, jump })
    }
}

fn fold(stack: &[ConvSpec], init: RfState, extent: impl Fn(&ConvSpec) -> f64) -> RfState {
    let mut state = init;
    for layer in stack {
        state.rf += (extent(layer) - 1.0) * state.jump;
        state.jump *= f64::from(layer.stride);
    }
    state
}

/// Receptive field of a stack of ordinary convolutions.
///
/// Errors if any layer carries a non-zero offset bound; deformable stacks go
/// through [`deformed_rf_bound`].
pub fn static_rf(stack: &[ConvSpec], init: RfState) -> Result<RfState> {
    if let Some(l) = stack.iter().find(|l| l.max_offset != 0.0) {
        return Err(Error::Contract(format!(
            "static receptive field undefined for a deformable layer (max_offset {})",
            l.max_offset
        )));
    }
    Ok(fold(stack, init, |l| f64::from(l.kernel)))
}

/// Receptive-field interval of a stack that may contain deformable layers.
///
/// The minimum folds with the plain kernel extents, the maximum with
/// `kernel + 2 * max_offset`. With all offsets zero both ends equal the
/// static receptive field.
pub fn deformed_rf_bound(stack: &[ConvSpec], init: RfState) -> (RfState, RfState) {
    let min = fold(stack, init, |l| f64::from(l.kernel));
    let max = fold(stack, init, |l| f64::from(l.kernel) + 2.0 * l.max_offset);
    (min, max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn conv3x3() -> ConvSpec {
        ConvSpec::new(3, 1, 1).unwrap()
    }

    #[test]
    fn four_head_convs_reach_nine_pixels() {
        let stack = vec![conv3x3(); 4];
        let out = static_rf(&stack, RfState::INITIAL).unwrap();
        assert_eq!(out.rf, 9.0);
        assert_eq!(out.jump, 1.0);
    }

    #[test]
    fn one_by_one_is_identity() {
        let stack = vec![ConvSpec::new(1, 1, 0).unwrap()];
        let out = static_rf(&stack, RfState::INITIAL).unwrap();
        assert_eq!(out.rf, 1.0);
    }

    #[test]
    fn strided_fold_by_hand() {
        let stack = vec![
            ConvSpec::new(3, 2, 1).unwrap(),
            ConvSpec::new(3, 2, 1).unwrap(),
        ];
        let out = static_rf(&stack, RfState::INITIAL).unwrap();
        assert_eq!(out.rf, 7.0);
        assert_eq!(out.jump, 4.0);
    }

    #[test]
    fn static_rejects_deformable_layers() {
        let stack = vec![conv3x3().with_max_offset(1.0).unwrap()];
        assert!(matches!(
            static_rf(&stack, RfState::INITIAL),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn offset_bound_widens_the_first_layer() {
        let mut stack = vec![conv3x3(); 4];
        stack[0] = conv3x3().with_max_offset(1.0).unwrap();
        let (min, max) = deformed_rf_bound(&stack, RfState::INITIAL);
        assert_eq!(min.rf, 9.0);
        assert_eq!(max.rf, 11.0);
    }

    #[test]
    fn zero_offsets_reduce_to_static() {
        let stack = vec![conv3x3(); 3];
        let (min, max) = deformed_rf_bound(&stack, RfState::INITIAL);
        let s = static_rf(&stack, RfState::INITIAL).unwrap();
        assert_eq!(min, s);
        assert_eq!(max, s);
    }

    #[test]
    fn larger_offsets_widen_the_gap_monotonically() {
        let mut prev_gap = 0.0;
        for off in [0.0, 0.5, 1.0, 2.0, 4.0] {
            let stack = vec![
                conv3x3().with_max_offset(off).unwrap(),
                conv3x3(),
            ];
            let (min, max) = deformed_rf_bound(&stack, RfState::INITIAL);
            let gap = max.rf - min.rf;
            assert!(gap >= prev_gap);
            prev_gap = gap;
        }
    }

    #[test]
    fn closed_form_on_random_stacks() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..200 {
            let depth = rng.gen_range(1..8);
            let stack: Vec<ConvSpec> = (0..depth)
                .map(|_| {
                    ConvSpec::new(2 * rng.gen_range(0..4) + 1, rng.gen_range(1..4), 1).unwrap()
                })
                .collect();
            let got = static_rf(&stack, RfState::INITIAL).unwrap();
            // rf = 1 + sum_i (k_i - 1) * prod_{j<i} s_j
            let mut expect = 1.0;
            let mut jump = 1.0;
            for l in &stack {
                expect += f64::from(l.kernel - 1) * jump;
                jump *= f64::from(l.stride);
            }
            assert_eq!(got.rf, expect);
            assert_eq!(got.jump, jump);
        }
    }

    #[test]
    fn folding_is_associative() {
        let mut rng = ChaCha8Rng::seed_from_u64(123);
        for _ in 0..100 {
            let mk = |rng: &mut ChaCha8Rng| {
                ConvSpec::new(2 * rng.gen_range(0..3) + 1, rng.gen_range(1..3), 0).unwrap()
            };
            let a: Vec<ConvSpec> = (0..rng.gen_range(1..4)).map(|_| mk(&mut rng)).collect();
            let b: Vec<ConvSpec> = (0..rng.gen_range(1..4)).map(|_| mk(&mut rng)).collect();
            let whole: Vec<ConvSpec> = a.iter().chain(&b).copied().collect();
            let direct = static_rf(&whole, RfState::INITIAL).unwrap();
            let staged = static_rf(&b, static_rf(&a, RfState::INITIAL).unwrap()).unwrap();
            assert_eq!(direct, staged);
        }
    }
}
