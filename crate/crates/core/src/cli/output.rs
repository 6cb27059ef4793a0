use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::Result;
use crate::evolution::EvolutionTrace;
use crate::hamiltonian::SheetNode;
use crate::path::ParameterLoop;
use crate::scheduler::Schedule;

pub const TRACE_HEADER: [&str; 12] = [
    "j", "x", "y", "dt", "t_cum", "P1", "P2", "re_omega_bar", "im_omega_bar", "zeta_A", "zeta_B", "speed",
];

/// Files produced by one run, held in memory until computation is done.
#[derive(Debug, Default)]
pub struct Artifacts {
    files: Vec<(String, Vec<u8>)>,
}

#[derive(Debug, Serialize)]
struct ManifestEntry<'a> {
    name: &'a str,
    bytes: usize,
    sha256: String,
}

impl Artifacts {
    pub fn add(&mut self, name: impl Into<String>, bytes: Vec<u8>) {
        let name = name.into();
        self.files.retain(|(n, _)| *n != name);
        self.files.push((name, bytes));
    }

    pub fn add_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut bytes = serde_json::to_vec_pretty(value)?;
        bytes.push(b'\n');
        self.add(name, bytes);
        Ok(())
    }

    pub fn names(&self) -> Vec<&str> {
        self.files.iter().map(|(n, _)| n.as_str()).collect()
    }

    pub fn get(&self, name: &str) -> Option<&[u8]> {
        self.files.iter().find(|(n, _)| n == name).map(|(_, b)| b.as_slice())
    }

    /// Writes every file plus `manifest.json` listing their hashes.
    pub fn write_to(mut self, dir: &Path) -> Result<Vec<String>> {
        self.files.sort_by(|a, b| a.0.cmp(&b.0));
        let manifest: Vec<ManifestEntry> = self
            .files
            .iter()
            .map(|(name, bytes)| ManifestEntry {
                name,
                bytes: bytes.len(),
                sha256: hex::encode(Sha256::digest(bytes)),
            })
            .collect();
        let mut manifest_bytes = serde_json::to_vec_pretty(&serde_json::json!({ "files": manifest }))?;
        manifest_bytes.push(b'\n');
        std::fs::create_dir_all(dir)?;
        for (name, bytes) in &self.files {
            std::fs::write(dir.join(name), bytes)?;
        }
        std::fs::write(dir.join("manifest.json"), manifest_bytes)?;
        let mut names: Vec<String> = self.files.into_iter().map(|(n, _)| n).collect();
        names.push("manifest.json".into());
        Ok(names)
    }
}

fn csv_writer() -> csv::Writer<Vec<u8>> {
    csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new())
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<Vec<u8>> {
    w.into_inner().map_err(|e| std::io::Error::other(e.to_string()).into())
}

pub fn trace_csv(trace: &EvolutionTrace) -> Result<Vec<u8>> {
    let mut w = csv_writer();
    w.write_record(TRACE_HEADER)?;
    for s in &trace.samples {
        let p2 = s.proportions.get(1).copied().unwrap_or(0.0);
        w.serialize((
            s.j,
            s.point.x,
            s.point.y,
            s.dt,
            s.t_cum,
            s.proportions[0],
            p2,
            s.omega_bar.re,
            s.omega_bar.im,
            s.zeta_a,
            s.zeta_b,
            s.speed,
        ))?;
    }
    finish(w)
}

pub fn schedule_csv(schedule: &Schedule) -> Result<Vec<u8>> {
    let mut w = csv_writer();
    w.write_record(["j", "dt"])?;
    for (j, dt) in schedule.dwells().iter().enumerate() {
        w.serialize((j, dt))?;
    }
    finish(w)
}

pub fn loop_csv(lp: &ParameterLoop) -> Result<Vec<u8>> {
    let mut w = csv_writer();
    w.write_record(["j", "x", "y", "C_j"])?;
    for (j, (p, c)) in lp.points().iter().zip(lp.arc_coords()).enumerate() {
        w.serialize((j, p.x, p.y, c))?;
    }
    finish(w)
}

/// Sheet samples; columns continue as `re_omega_3, im_omega_3, ...` for more
/// than two levels.
pub fn sheets_csv(nodes: &[SheetNode]) -> Result<Vec<u8>> {
    let levels = nodes.first().map_or(2, |n| n.eigenvalues.len());
    let mut header = vec!["x".to_string(), "y".to_string()];
    for n in 1..=levels {
        header.push(format!("re_omega_{n}"));
        header.push(format!("im_omega_{n}"));
    }
    let mut w = csv_writer();
    w.write_record(&header)?;
    for node in nodes {
        let mut row = vec![node.point.x, node.point.y];
        for e in &node.eigenvalues {
            row.push(e.re);
            row.push(e.im);
        }
        w.serialize(row)?;
    }
    finish(w)
}

pub const PLOT_SCRIPT: &str = r#"#!/usr/bin/env python3
"""Plots the CSV files in this directory. Usage: python3 plot.py [dir]"""
import csv
import glob
import os
import sys

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

root = sys.argv[1] if len(sys.argv) > 1 else os.path.dirname(os.path.abspath(__file__))


def read(name):
    with open(os.path.join(root, name)) as f:
        rows = list(csv.DictReader(f))
    return {k: [float(r[k]) for r in rows] for k in rows[0]} if rows else {}


for path in sorted(glob.glob(os.path.join(root, "trace_*.csv"))):
    name = os.path.basename(path)[:-4]
    t = read(os.path.basename(path))
    fig, ax = plt.subplots(3, 1, figsize=(6, 8), sharex=True)
    ax[0].plot(t["j"], t["P1"], label="P1")
    ax[0].plot(t["j"], t["P2"], label="P2")
    ax[0].legend()
    ax[1].plot(t["j"], t["zeta_A"], label="zeta_A")
    ax[1].plot(t["j"], t["zeta_B"], label="zeta_B")
    ax[1].legend()
    ax[2].step(t["j"], t["dt"], where="pre")
    ax[2].set_ylabel("dt")
    ax[2].set_xlabel("j")
    fig.suptitle(name)
    fig.savefig(os.path.join(root, name + ".png"), dpi=120)
    plt.close(fig)

if os.path.exists(os.path.join(root, "sheets.csv")):
    s = read("sheets.csv")
    xs = sorted(set(s["x"]))
    ys = sorted(set(s["y"]))
    fig, ax = plt.subplots(1, 2, figsize=(10, 4))
    for k, key in enumerate(["im_omega_1", "im_omega_2"]):
        grid = [s[key][i * len(xs):(i + 1) * len(xs)] for i in range(len(ys))]
        im = ax[k].imshow(grid, origin="lower", extent=[xs[0], xs[-1], ys[0], ys[-1]], aspect="auto")
        ax[k].set_title(key)
        fig.colorbar(im, ax=ax[k])
    if os.path.exists(os.path.join(root, "loop.csv")):
        lp = read("loop.csv")
        for a in ax:
            a.plot(lp["x"], lp["y"], "w-", lw=1)
    fig.savefig(os.path.join(root, "sheets.png"), dpi=120)
    plt.close(fig)

if os.path.exists(os.path.join(root, "comparison.csv")):
    with open(os.path.join(root, "comparison.csv")) as f:
        rows = list(csv.DictReader(f))
    seen = {}
    for r in rows:
        seen[(r["method"], r["input_mode"])] = float(r["CI"])
    labels = [f"{m} {i}" for m, i in seen]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.bar(labels, list(seen.values()))
    ax.set_ylim(0.5, 1.0)
    ax.set_ylabel("CI")
    fig.savefig(os.path.join(root, "comparison.png"), dpi=120)
    plt.close(fig)
"#;
