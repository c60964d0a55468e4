//! The metamorphic testing engine: enumerate data views per referenced
//! kind, evaluate the relation once per full assignment, collect failures
//! and deduplicate the ones whose follow-up requests expose nothing new.

use std::path::Path;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::collected::CollectedData;
use crate::config::CampaignConfig;
use crate::executor::{ExecutionContext, ReqwestTransport, SutTarget, Transport};
use crate::model::InputSequence;
use crate::provider::{DataKind, ProviderConfig, ProviderState};
use crate::smrl::ast::RelationAst;
use crate::smrl::eval::{evaluate_relation, EvalContext, TouchedOutput, Verdict};
use crate::smrl::extract_source_input_types;
use crate::webutils::{ActionClassifier, Comparator, WebUtilError};

/// A kept or candidate relation violation with its full context.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Failure {
    pub mr_name: String,
    /// (kind, view offset) for every kind the relation iterates over.
    pub view_assignment: Vec<(String, usize)>,
    pub expression_index: usize,
    pub source_inputs: Vec<InputSequence>,
    pub followup_inputs: Vec<InputSequence>,
    pub outputs: Vec<TouchedOutput>,
    pub followup_requests: Vec<(String, String)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EvalOutcome {
    Holds,
    Violated,
    Error,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalRecord {
    pub view_assignment: Vec<(String, usize)>,
    pub outcome: EvalOutcome,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MrStats {
    pub mr_name: String,
    pub executions: usize,
    pub kept: usize,
    pub suppressed: usize,
    pub errors: usize,
    pub wall_ms: u128,
    pub budget_exhausted: bool,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct CampaignReport {
    pub per_mr: Vec<MrStats>,
}

impl CampaignReport {
    pub fn total_kept(&self) -> usize {
        self.per_mr.iter().map(|m| m.kept).sum()
    }

    pub fn total_suppressed(&self) -> usize {
        self.per_mr.iter().map(|m| m.suppressed).sum()
    }

    pub fn total_errors(&self) -> usize {
        self.per_mr.iter().map(|m| m.errors).sum()
    }

    pub fn render_table(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "{:<44} {:>10} {:>8} {:>10} {:>7} {:>9}\n",
            "MR", "executions", "failures", "suppressed", "errors", "time(ms)"
        ));
        for mr in &self.per_mr {
            out.push_str(&format!(
                "{:<44} {:>10} {:>8} {:>10} {:>7} {:>9}{}\n",
                mr.mr_name,
                mr.executions,
                mr.kept,
                mr.suppressed,
                mr.errors,
                mr.wall_ms,
                if mr.budget_exhausted { "  (budget hit)" } else { "" }
            ));
        }
        out.push_str(&format!(
            "{:<44} {:>10} {:>8} {:>10} {:>7}\n",
            "total",
            self.per_mr.iter().map(|m| m.executions).sum::<usize>(),
            self.total_kept(),
            self.total_suppressed(),
            self.total_errors(),
        ));
        out
    }
}

/// Everything one relation run produced.
#[derive(Debug)]
pub struct MrRunResult {
    pub stats: MrStats,
    pub kept: Vec<Failure>,
    pub errors: Vec<String>,
    pub records: Vec<EvalRecord>,
}

#[derive(Debug, thiserror::Error)]
pub enum EngineError {
    #[error(transparent)]
    WebUtil(#[from] WebUtilError),
    #[error("cannot build HTTP transport: {0}")]
    Transport(#[from] reqwest::Error),
    #[error("cannot persist results to {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

/// Runtime wiring shared by every evaluation of one engine run.
pub struct Engine<'a> {
    pub config: &'a CampaignConfig,
    pub collected: &'a CollectedData,
    pub transport_factory: &'a (dyn Fn() -> Box<dyn Transport> + Sync),
}

impl<'a> Engine<'a> {
    pub fn new(
        config: &'a CampaignConfig,
        collected: &'a CollectedData,
        transport_factory: &'a (dyn Fn() -> Box<dyn Transport> + Sync),
    ) -> Engine<'a> {
        Engine {
            config,
            collected,
            transport_factory,
        }
    }

    /// Factory for campaigns over real HTTP.
    pub fn reqwest_factory(
        config: &CampaignConfig,
    ) -> Result<impl Fn() -> Box<dyn Transport> + Sync, EngineError> {
        // Probe once so misconfiguration surfaces before the run starts.
        ReqwestTransport::new(config.sut.insecure_tls)?;
        let insecure_tls = config.sut.insecure_tls;
        Ok(move || {
            Box::new(ReqwestTransport::new(insecure_tls).expect("transport built once already"))
                as Box<dyn Transport>
        })
    }

    fn provider(&self) -> ProviderState {
        let classifier = self.classifier().expect("validated at run start");
        ProviderState::from_collected(
            self.collected,
            &self.config.users(),
            &|a| classifier.is_login(a),
            &ProviderConfig::from_campaign(self.config),
        )
    }

    fn comparator(&self) -> Result<Comparator, WebUtilError> {
        Comparator::from_settings(&self.config.comparator)
    }

    fn classifier(&self) -> Result<ActionClassifier, WebUtilError> {
        ActionClassifier::from_settings(&self.config.detection, &self.config.comparator)
    }

    /// Kinds the relation iterates views over, in canonical order: Input
    /// first, then User, then the rest alphabetically (the declaration
    /// order of `DataKind`).
    pub fn view_kinds(mr: &RelationAst) -> Vec<DataKind> {
        extract_source_input_types(mr)
            .into_iter()
            .filter(|k| k.is_rotatable())
            .collect()
    }

    /// Run one relation over every view combination of its referenced kinds.
    pub fn run_mr(&self, mr: &RelationAst) -> Result<MrRunResult, EngineError> {
        let started = Instant::now();
        let budget = self
            .config
            .per_mr_time_budget_secs
            .map(Duration::from_secs);
        let comparator = std::rc::Rc::new(self.comparator()?);
        let classifier = self.classifier()?;
        let mut provider = self.provider();
        let kinds = Self::view_kinds(mr);

        let mut raw_failures: Vec<Failure> = Vec::new();
        let mut errors: Vec<String> = Vec::new();
        let mut records: Vec<EvalRecord> = Vec::new();
        let mut budget_exhausted = false;

        // Recursive nested-loop enumeration, one level per kind.
        fn iterate(
            level: usize,
            kinds: &[DataKind],
            provider: &mut ProviderState,
            evaluate: &mut dyn FnMut(&mut ProviderState) -> bool,
        ) -> bool {
            if level == kinds.len() {
                return evaluate(provider);
            }
            while provider.has_more_views(kinds[level]) {
                provider.next_view(kinds[level]);
                if !iterate(level + 1, kinds, provider, evaluate) {
                    // Drain remaining views so per-kind state resets cleanly.
                    while provider.has_more_views(kinds[level]) {
                        provider.next_view(kinds[level]);
                    }
                    return false;
                }
            }
            true
        }

        {
            let mut evaluate = |provider: &mut ProviderState| -> bool {
                if let Some(budget) = budget {
                    if started.elapsed() > budget {
                        budget_exhausted = true;
                        return false;
                    }
                }
                let assignment: Vec<(String, usize)> = kinds
                    .iter()
                    .map(|k| (k.function_name().to_string(), provider.current_offset(*k)))
                    .collect();
                let mut executor = ExecutionContext::new(
                    (self.transport_factory)(),
                    SutTarget::from_campaign(self.config),
                    comparator.clone(),
                );
                let mut ctx = EvalContext::new(
                    provider,
                    &mut executor,
                    self.collected,
                    comparator.as_ref(),
                    &classifier,
                    &self.config.supervisors,
                );
                match evaluate_relation(mr, &mut ctx) {
                    Ok(Verdict::Holds) => records.push(EvalRecord {
                        view_assignment: assignment,
                        outcome: EvalOutcome::Holds,
                    }),
                    Ok(Verdict::Violated(v)) => {
                        records.push(EvalRecord {
                            view_assignment: assignment.clone(),
                            outcome: EvalOutcome::Violated,
                        });
                        raw_failures.push(Failure {
                            mr_name: mr.name.clone(),
                            view_assignment: assignment,
                            expression_index: v.expression_index,
                            source_inputs: v.source_inputs,
                            followup_inputs: v.followup_inputs,
                            outputs: v.outputs,
                            followup_requests: v.followup_requests,
                        });
                    }
                    Err(e) => {
                        records.push(EvalRecord {
                            view_assignment: assignment.clone(),
                            outcome: EvalOutcome::Error,
                        });
                        errors.push(format!("{}: {assignment:?}: {e}", mr.name));
                    }
                }
                true
            };
            iterate(0, &kinds, &mut provider, &mut evaluate);
        }

        let executions = records.len();
        let mut kept: Vec<Failure> = Vec::new();
        let mut suppressed = 0usize;
        for failure in raw_failures {
            if is_redundant(&failure, &kept) {
                suppressed += 1;
            } else {
                kept.push(failure);
            }
        }

        Ok(MrRunResult {
            stats: MrStats {
                mr_name: mr.name.clone(),
                executions,
                kept: kept.len(),
                suppressed,
                errors: errors.len(),
                wall_ms: started.elapsed().as_millis(),
                budget_exhausted,
            },
            kept,
            errors,
            records,
        })
    }

    /// Run a list of relations. Parallelism shards whole relations across
    /// workers, and only when the SUT is declared stateless; the kept
    /// failure set is the same either way, results are merged in input
    /// order.
    pub fn run_campaign(&self, mrs: &[RelationAst]) -> Result<CampaignOutcome, EngineError> {
        let workers = if self.config.sut.stateless {
            self.config.parallelism.max(1)
        } else {
            1
        };
        let mut results: Vec<Option<MrRunResult>> = Vec::new();
        if workers <= 1 || mrs.len() <= 1 {
            for mr in mrs {
                results.push(Some(self.run_mr(mr)?));
            }
        } else {
            results.resize_with(mrs.len(), || None);
            let engine = &*self;
            let next = std::sync::atomic::AtomicUsize::new(0);
            let slots: Vec<std::sync::Mutex<Option<Result<MrRunResult, EngineError>>>> =
                (0..mrs.len()).map(|_| std::sync::Mutex::new(None)).collect();
            std::thread::scope(|scope| {
                for _ in 0..workers.min(mrs.len()) {
                    scope.spawn(|| loop {
                        let i = next.fetch_add(1, std::sync::atomic::Ordering::SeqCst);
                        if i >= mrs.len() {
                            break;
                        }
                        let result = engine.run_mr(&mrs[i]);
                        *slots[i].lock().unwrap() = Some(result);
                    });
                }
            });
            for (i, slot) in slots.into_iter().enumerate() {
                let result = slot.into_inner().unwrap().expect("worker filled slot")?;
                results[i] = Some(result);
            }
        }

        let mut report = CampaignReport::default();
        let mut failures = Vec::new();
        let mut errors = Vec::new();
        let mut records = Vec::new();
        for result in results.into_iter().flatten() {
            report.per_mr.push(result.stats);
            failures.extend(result.kept);
            errors.extend(result.errors);
            records.extend(result.records);
        }
        Ok(CampaignOutcome {
            report,
            failures,
            errors,
            records,
        })
    }
}

#[derive(Debug)]
pub struct CampaignOutcome {
    pub report: CampaignReport,
    pub failures: Vec<Failure>,
    pub errors: Vec<String>,
    pub records: Vec<EvalRecord>,
}

impl CampaignOutcome {
    /// Persist the failure log, the report and a readable summary.
    pub fn persist(&self, dir: &Path) -> Result<(), EngineError> {
        let io = |source: std::io::Error, path: &Path| EngineError::Io {
            path: path.display().to_string(),
            source,
        };
        std::fs::create_dir_all(dir).map_err(|e| io(e, dir))?;
        let failures_path = dir.join("failures.jsonl");
        let mut lines = String::new();
        for failure in &self.failures {
            lines.push_str(&serde_json::to_string(failure).expect("failure serializes"));
            lines.push('\n');
        }
        std::fs::write(&failures_path, lines).map_err(|e| io(e, &failures_path))?;

        let report_path = dir.join("report.json");
        std::fs::write(
            &report_path,
            serde_json::to_string_pretty(&self.report).expect("report serializes"),
        )
        .map_err(|e| io(e, &report_path))?;

        let summary_path = dir.join("report.txt");
        let mut summary = self.report.render_table();
        if !self.errors.is_empty() {
            summary.push_str("\nevaluation errors:\n");
            for e in &self.errors {
                summary.push_str(&format!("  {e}\n"));
            }
        }
        std::fs::write(&summary_path, summary).map_err(|e| io(e, &summary_path))?;
        Ok(())
    }
}

/// A candidate is redundant when every request its violating follow-up
/// issued already appears in some kept failure's request set.
pub fn is_redundant(candidate: &Failure, kept: &[Failure]) -> bool {
    if kept.is_empty() {
        return false;
    }
    candidate.followup_requests.iter().all(|request| {
        kept.iter().any(|k| k.followup_requests.contains(request))
    })
}
