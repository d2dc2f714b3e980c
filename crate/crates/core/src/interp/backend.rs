use std::collections::BTreeMap;

use super::fitness::{outputs, score, Counters, EvalOutcome};
use super::linear::LgpKernel;
use super::packed::{eval_bool_packed, eval_bool_packed_counted};
use super::rpn::RpnKernel;
use super::{
    require_cases, BackendKind, ConfigError, DataRef, Dataset, EvalConfig, EvalError, ProgramRef,
};
use crate::lgp::rpn_to_lgp;

/// An evaluation strategy. Instances are built from an [`EvalConfig`] by a
/// [`BackendRegistry`] and are safe to share across worker threads.
pub trait Backend: Send + Sync {
    fn config(&self) -> &EvalConfig;

    fn kind(&self) -> BackendKind {
        self.config().backend
    }

    fn label(&self) -> String {
        self.config().label()
    }

    fn evaluate(&self, program: ProgramRef<'_>, data: DataRef<'_>) -> Result<EvalOutcome, EvalError>;

    /// Like [`Backend::evaluate`], also returning interpreter counters.
    fn evaluate_counted(
        &self,
        program: ProgramRef<'_>,
        data: DataRef<'_>,
    ) -> Result<(EvalOutcome, Counters), EvalError>;

    /// Raw program output for every case, in case order.
    fn case_outputs(&self, program: ProgramRef<'_>, data: &Dataset) -> Result<Vec<f64>, EvalError>;
}

pub type BackendFactory = fn(EvalConfig) -> Box<dyn Backend>;

/// Backends by name.
pub struct BackendRegistry {
    factories: BTreeMap<&'static str, BackendFactory>,
}

impl BackendRegistry {
    pub fn empty() -> Self {
        Self {
            factories: BTreeMap::new(),
        }
    }

    /// Registry holding every built-in backend.
    pub fn with_defaults() -> Self {
        let mut registry = Self::empty();
        registry.register(BackendKind::Rpn1d.name(), |cfg| Box::new(PostfixBackend { cfg }));
        registry.register(BackendKind::Rpn2d.name(), |cfg| Box::new(PostfixBackend { cfg }));
        registry.register(BackendKind::Lgp1d.name(), |cfg| Box::new(LinearBackend { cfg }));
        registry.register(BackendKind::Lgp2d.name(), |cfg| Box::new(LinearBackend { cfg }));
        registry.register(BackendKind::Lgp2dReg.name(), |cfg| Box::new(LinearBackend { cfg }));
        registry.register(BackendKind::BoolPacked.name(), |cfg| Box::new(PackedBackend { cfg }));
        registry
    }

    pub fn register(&mut self, name: &'static str, factory: BackendFactory) {
        self.factories.insert(name, factory);
    }

    pub fn names(&self) -> impl Iterator<Item = &'static str> + '_ {
        self.factories.keys().copied()
    }

    /// Validates `cfg` and instantiates the backend it names.
    pub fn build(&self, cfg: &EvalConfig) -> Result<Box<dyn Backend>, ConfigError> {
        cfg.validate()?;
        let factory = self
            .factories
            .get(cfg.backend.name())
            .ok_or_else(|| ConfigError::UnknownBackend(cfg.backend.name().to_string()))?;
        Ok(factory(*cfg))
    }

    pub fn build_all(&self, cfgs: &[EvalConfig]) -> Result<Vec<Box<dyn Backend>>, ConfigError> {
        cfgs.iter().map(|cfg| self.build(cfg)).collect()
    }
}

impl Default for BackendRegistry {
    fn default() -> Self {
        Self::with_defaults()
    }
}

fn real<'a>(kind: BackendKind, data: DataRef<'a>) -> Result<&'a Dataset, EvalError> {
    match data {
        DataRef::Real(d) => {
            require_cases(d)?;
            Ok(d)
        }
        DataRef::Packed(_) => Err(EvalError::Unsupported {
            backend: kind,
            what: "bit-packed datasets",
        }),
    }
}

/// `rpn1d` and `rpn2d`.
struct PostfixBackend {
    cfg: EvalConfig,
}

impl PostfixBackend {
    fn kernel(&self, program: ProgramRef<'_>, data: &Dataset) -> Result<RpnKernel, EvalError> {
        match program {
            ProgramRef::Tree(genome) => RpnKernel::compile(genome, data, self.cfg.batch, &self.cfg),
            ProgramRef::Linear(_) => Err(EvalError::Unsupported {
                backend: self.cfg.backend,
                what: "linear programs",
            }),
        }
    }
}

impl Backend for PostfixBackend {
    fn config(&self) -> &EvalConfig {
        &self.cfg
    }

    fn evaluate(&self, program: ProgramRef<'_>, data: DataRef<'_>) -> Result<EvalOutcome, EvalError> {
        let data = real(self.cfg.backend, data)?;
        Ok(score(&self.kernel(program, data)?, data, &mut ()))
    }

    fn evaluate_counted(
        &self,
        program: ProgramRef<'_>,
        data: DataRef<'_>,
    ) -> Result<(EvalOutcome, Counters), EvalError> {
        let data = real(self.cfg.backend, data)?;
        let mut counters = Counters::default();
        let outcome = score(&self.kernel(program, data)?, data, &mut counters);
        Ok((outcome, counters))
    }

    fn case_outputs(&self, program: ProgramRef<'_>, data: &Dataset) -> Result<Vec<f64>, EvalError> {
        require_cases(data)?;
        Ok(outputs(&self.kernel(program, data)?, data))
    }
}

/// `lgp1d`, `lgp2d` and `lgp2d_reg`. Trees are converted on the fly.
struct LinearBackend {
    cfg: EvalConfig,
}

impl LinearBackend {
    fn kernel(&self, program: ProgramRef<'_>, data: &Dataset) -> Result<LgpKernel, EvalError> {
        let registers = match self.cfg.backend {
            BackendKind::Lgp2dReg => self.cfg.registers,
            _ => 0,
        };
        match program {
            ProgramRef::Linear(p) => LgpKernel::compile(p, data, self.cfg.batch, registers, &self.cfg),
            ProgramRef::Tree(g) => {
                LgpKernel::compile(&rpn_to_lgp(g), data, self.cfg.batch, registers, &self.cfg)
            }
        }
    }
}

impl Backend for LinearBackend {
    fn config(&self) -> &EvalConfig {
        &self.cfg
    }

    fn evaluate(&self, program: ProgramRef<'_>, data: DataRef<'_>) -> Result<EvalOutcome, EvalError> {
        let data = real(self.cfg.backend, data)?;
        Ok(score(&self.kernel(program, data)?, data, &mut ()))
    }

    fn evaluate_counted(
        &self,
        program: ProgramRef<'_>,
        data: DataRef<'_>,
    ) -> Result<(EvalOutcome, Counters), EvalError> {
        let data = real(self.cfg.backend, data)?;
        let mut counters = Counters::default();
        let outcome = score(&self.kernel(program, data)?, data, &mut counters);
        Ok((outcome, counters))
    }

    fn case_outputs(&self, program: ProgramRef<'_>, data: &Dataset) -> Result<Vec<f64>, EvalError> {
        require_cases(data)?;
        Ok(outputs(&self.kernel(program, data)?, data))
    }
}

/// `bool_packed`.
struct PackedBackend {
    cfg: EvalConfig,
}

impl Backend for PackedBackend {
    fn config(&self) -> &EvalConfig {
        &self.cfg
    }

    fn evaluate(&self, program: ProgramRef<'_>, data: DataRef<'_>) -> Result<EvalOutcome, EvalError> {
        match data {
            DataRef::Packed(p) => eval_bool_packed(program, p, &self.cfg),
            DataRef::Real(_) => Err(EvalError::Unsupported {
                backend: self.cfg.backend,
                what: "real-valued datasets",
            }),
        }
    }

    fn evaluate_counted(
        &self,
        program: ProgramRef<'_>,
        data: DataRef<'_>,
    ) -> Result<(EvalOutcome, Counters), EvalError> {
        match data {
            DataRef::Packed(p) => eval_bool_packed_counted(program, p, &self.cfg),
            DataRef::Real(_) => Err(EvalError::Unsupported {
                backend: self.cfg.backend,
                what: "real-valued datasets",
            }),
        }
    }

    fn case_outputs(&self, _: ProgramRef<'_>, _: &Dataset) -> Result<Vec<f64>, EvalError> {
        Err(EvalError::Unsupported {
            backend: self.cfg.backend,
            what: "per-case real outputs",
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::genome::{sextic_worked_example, TreeGenome};
    use crate::interp::{PackedDataset, TargetKind};

    #[test]
    fn registry_lists_every_backend() {
        let registry = BackendRegistry::with_defaults();
        let mut names: Vec<_> = registry.names().collect();
        names.sort();
        let mut expected: Vec<_> = BackendKind::ALL.iter().map(|k| k.name()).collect();
        expected.sort();
        assert_eq!(names, expected);
        let empty = BackendRegistry::empty();
        assert!(matches!(
            empty.build(&EvalConfig::new(BackendKind::Rpn1d)),
            Err(ConfigError::UnknownBackend(_))
        ));
    }

    #[test]
    fn dispatch_counts() {
        let g = sextic_worked_example();
        let n = 10;
        let xs: Vec<f64> = (0..n).map(|i| i as f64 / 10.0).collect();
        let d = Dataset::from_columns(vec![xs], vec![0.0; n], TargetKind::Regression).unwrap();
        let registry = BackendRegistry::with_defaults();

        let rpn = registry.build(&EvalConfig::new(BackendKind::Rpn2d).with_batch(4)).unwrap();
        let (_, c) = rpn.evaluate_counted((&g).into(), DataRef::Real(&d)).unwrap();
        // two full batches plus two single-case tail evaluations
        assert_eq!(c.dispatches, (2 + 2) * 15);
        assert_eq!(c.stack_fetches, (2 + 2) * 14);

        let lgp = registry.build(&EvalConfig::new(BackendKind::Lgp2d).with_batch(4)).unwrap();
        let (_, c) = lgp.evaluate_counted((&g).into(), DataRef::Real(&d)).unwrap();
        assert_eq!(c.dispatches, (2 + 2) * 7);
        assert_eq!(c.stack_fetches, (2 + 2) * 6);
        assert_eq!(c.spill_touches, 0);

        let reg = registry
            .build(&EvalConfig::new(BackendKind::Lgp2dReg).with_batch(4).with_registers(1))
            .unwrap();
        let (_, c) = reg.evaluate_counted((&g).into(), DataRef::Real(&d)).unwrap();
        assert!(c.spill_touches > 0);
        let reg4 = registry
            .build(&EvalConfig::new(BackendKind::Lgp2dReg).with_batch(4).with_registers(4))
            .unwrap();
        let (_, c) = reg4.evaluate_counted((&g).into(), DataRef::Real(&d)).unwrap();
        assert_eq!(c.spill_touches, 0);
    }

    #[test]
    fn depth_one_program_stays_in_one_register() {
        let g = TreeGenome::parse_rpn("X0 X0 * sin X0 +").unwrap();
        let p = rpn_to_lgp(&g);
        assert_eq!(p.max_stack_depth(), 1);
        let d = Dataset::from_columns(vec![vec![0.25; 9]], vec![0.0; 9], TargetKind::Regression).unwrap();
        let reg = BackendRegistry::with_defaults()
            .build(&EvalConfig::new(BackendKind::Lgp2dReg).with_batch(4).with_registers(1))
            .unwrap();
        let (_, c) = reg.evaluate_counted(ProgramRef::Linear(&p), DataRef::Real(&d)).unwrap();
        assert_eq!(c.spill_touches, 0);
    }

    #[test]
    fn representation_and_data_mismatches() {
        let registry = BackendRegistry::with_defaults();
        let g = TreeGenome::parse_rpn("X0 X1 AND").unwrap();
        let p = rpn_to_lgp(&g);
        let packed = PackedDataset::from_fn(2, 4, |v, c| (c >> v) & 1 == 1, |c| c == 3);
        let rpn = registry.build(&EvalConfig::new(BackendKind::Rpn1d)).unwrap();
        assert!(matches!(
            rpn.evaluate(ProgramRef::Linear(&p), DataRef::Real(&packed.unpack())),
            Err(EvalError::Unsupported { .. })
        ));
        assert!(matches!(
            rpn.evaluate((&g).into(), DataRef::Packed(&packed)),
            Err(EvalError::Unsupported { .. })
        ));
        let bits = registry.build(&EvalConfig::new(BackendKind::BoolPacked)).unwrap();
        assert_eq!(bits.evaluate((&g).into(), DataRef::Packed(&packed)).unwrap().fitness, 0.0);
        assert_eq!(bits.evaluate((&p).into(), DataRef::Packed(&packed)).unwrap().fitness, 0.0);
        let real = TreeGenome::parse_rpn("X0 X1 +").unwrap();
        assert_eq!(
            bits.evaluate((&real).into(), DataRef::Packed(&packed)),
            Err(EvalError::NonBoolean(crate::genome::OpCode::Add))
        );
    }
}
