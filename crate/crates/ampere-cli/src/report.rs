use std::path::{Path, PathBuf};
use std::time::Instant;

use ampere::io::{self, Table};
use anyhow::{Context, Result};
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
    Skip,
}

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub verdict: Verdict,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct Timing {
    pub stage: String,
    pub seconds: f64,
}

#[derive(Debug, Serialize)]
pub struct RunReport {
    pub command: String,
    pub seed: u64,
    pub checks: Vec<Check>,
    pub timings: Vec<Timing>,
    pub artifacts: Vec<String>,
    #[serde(skip)]
    out: PathBuf,
    #[serde(skip)]
    clock: Instant,
}

impl RunReport {
    pub fn new(command: &str, seed: u64, out: &Path) -> Result<Self> {
        std::fs::create_dir_all(out).with_context(|| format!("cannot create {}", out.display()))?;
        Ok(RunReport {
            command: command.into(),
            seed,
            checks: Vec::new(),
            timings: Vec::new(),
            artifacts: Vec::new(),
            out: out.to_path_buf(),
            clock: Instant::now(),
        })
    }

    pub fn check(&mut self, name: &str, pass: bool, detail: impl Into<String>) {
        let verdict = if pass { Verdict::Pass } else { Verdict::Fail };
        self.push(name, verdict, detail.into());
    }

    pub fn skip(&mut self, name: &str, detail: impl Into<String>) {
        self.push(name, Verdict::Skip, detail.into());
    }

    /// Records a solver error as a failed check.
    pub fn failed(&mut self, name: &str, err: &ampere::Error) {
        self.push(name, Verdict::Fail, err.to_string());
    }

    fn push(&mut self, name: &str, verdict: Verdict, detail: String) {
        assert!(!self.checks.iter().any(|c| c.name == name), "check {name} declared twice");
        log::info!("{name}: {verdict:?} {detail}");
        self.checks.push(Check { name: name.into(), verdict, detail });
    }

    /// Closes the current stage.
    pub fn lap(&mut self, stage: &str) {
        let seconds = self.clock.elapsed().as_secs_f64();
        self.clock = Instant::now();
        self.timings.push(Timing { stage: stage.into(), seconds });
    }

    pub fn csv(&mut self, name: &str, table: &Table) -> Result<()> {
        let text = table.to_csv()?;
        self.write(name, &text)
    }

    pub fn json(&mut self, name: &str, value: &impl Serialize) -> Result<()> {
        let text = serde_json::to_string_pretty(value)? + "\n";
        self.write(name, &text)
    }

    pub fn svg(&mut self, name: &str, text: ampere::Result<String>) -> Result<()> {
        let text = text?;
        self.write(name, &text)
    }

    fn write(&mut self, name: &str, text: &str) -> Result<()> {
        io::write_text(&self.out.join(name), text)?;
        self.artifacts.push(name.into());
        Ok(())
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.verdict != Verdict::Fail)
    }

    pub fn finish(mut self) -> Result<bool> {
        self.artifacts.push("report.json".into());
        let text = serde_json::to_string_pretty(&self)? + "\n";
        io::write_text(&self.out.join("report.json"), &text)?;
        for c in &self.checks {
            let tag = match c.verdict {
                Verdict::Pass => "pass",
                Verdict::Fail => "FAIL",
                Verdict::Skip => "skip",
            };
            println!("{tag:>4}  {}: {}", c.name, c.detail);
        }
        println!("artifacts in {}: {}", self.out.display(), self.artifacts.join(", "));
        Ok(self.passed())
    }
}
