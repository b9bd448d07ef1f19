use std::ffi::{CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use chain_ipf_ffi::*;

const MODEL: &str = include_str!("../../core/data/chd_model.json");
const TABLE1: &str = include_str!("../../core/data/table1.csv");

fn last_error() -> String {
    unsafe { CStr::from_ptr(chain_ipf_last_error()) }
        .to_string_lossy()
        .into_owned()
}

fn graph() -> *mut ChainIpfGraph {
    let json = CString::new(MODEL).unwrap();
    let mut g = ptr::null_mut();
    assert_eq!(unsafe { chain_ipf_graph_from_json(json.as_ptr(), &mut g) }, ChainIpfStatus::Ok);
    g
}

#[test]
fn uniform_model_probabilities() {
    let g = graph();
    let mut n = 0;
    let mut p = 0.0;
    unsafe {
        assert_eq!(chain_ipf_graph_num_variables(g, &mut n), ChainIpfStatus::Ok);
        assert_eq!(n, 4);
        let config = [0usize, 1, 0, 3];
        assert_eq!(chain_ipf_joint_probability(g, config.as_ptr(), 4, &mut p), ChainIpfStatus::Ok);
        chain_ipf_graph_free(g);
    }
    assert!((p - 1.0 / 64.0).abs() < 1e-15);
}

#[test]
fn conditional_fit_through_handles() {
    let g = graph();
    let csv = CString::new(TABLE1).unwrap();
    let mut d = ptr::null_mut();
    let mut t = ptr::null_mut();
    let mut len = 0;
    let mut first = 0.0;
    let mut last = 0.0;
    let mut converged = false;
    unsafe {
        assert_eq!(chain_ipf_dataset_from_csv(g, csv.as_ptr(), &mut d), ChainIpfStatus::Ok);
        chain_ipf_dataset_len(d, &mut len);
        assert_eq!(len, 64);
        let opts = ChainIpfFitOptions { max_cycles: 200, ..chain_ipf_fit_options_default() };
        let status = chain_ipf_fit(g, d, ChainIpfObjective::ConditionalLikelihood, &opts, &mut t);
        assert_eq!(status, ChainIpfStatus::Ok, "{}", last_error());
        chain_ipf_trace_len(t, &mut len);
        chain_ipf_trace_objective(t, 0, &mut first);
        chain_ipf_trace_objective(t, len - 1, &mut last);
        chain_ipf_trace_converged(t, &mut converged);
        let mut fitted = ptr::null_mut();
        assert_eq!(chain_ipf_trace_graph(t, &mut fitted), ChainIpfStatus::Ok);
        let mut cll = 0.0;
        chain_ipf_conditional_log_likelihood(fitted, d, &mut cll);
        assert_eq!(cll, last);
        let mut csv_out = ptr::null_mut();
        chain_ipf_trace_to_csv(t, &mut csv_out);
        let text = CStr::from_ptr(csv_out).to_str().unwrap().to_owned();
        assert!(text.starts_with("cycle,objective,wall_ms,optimizer,seed\n"));
        chain_ipf_string_free(csv_out);
        assert_eq!(
            chain_ipf_trace_objective(t, len, &mut last),
            ChainIpfStatus::InvalidArgument
        );
        chain_ipf_graph_free(fitted);
        chain_ipf_trace_free(t);
        chain_ipf_dataset_free(d);
        chain_ipf_graph_free(g);
    }
    assert!(converged);
    assert!(last > first);
}

#[test]
fn errors_set_codes_and_messages() {
    let mut g = ptr::null_mut();
    let bad = CString::new("{\"schema_version\": 1}").unwrap();
    unsafe {
        assert_eq!(chain_ipf_graph_from_json(bad.as_ptr(), &mut g), ChainIpfStatus::Schema);
        assert!(last_error().contains("schema error"));
        assert_eq!(chain_ipf_graph_from_json(ptr::null(), &mut g), ChainIpfStatus::NullPointer);
        assert!(g.is_null());

        let g = graph();
        let csv = CString::new("a,s,d,c\n30-39,m,maybe,asympt\n").unwrap();
        let mut d = ptr::null_mut();
        assert_eq!(chain_ipf_dataset_from_csv(g, csv.as_ptr(), &mut d), ChainIpfStatus::Schema);
        assert!(last_error().contains("row 2"));
        let mut p = 0.0;
        let short = [0usize; 2];
        assert_eq!(
            chain_ipf_joint_probability(g, short.as_ptr(), 2, &mut p),
            ChainIpfStatus::InvalidArgument
        );
        chain_ipf_graph_free(g);
    }
}

#[test]
fn json_round_trip() {
    let g = graph();
    let mut out = ptr::null_mut();
    unsafe {
        assert_eq!(chain_ipf_graph_to_json(g, &mut out), ChainIpfStatus::Ok);
        assert_eq!(CStr::from_ptr(out).to_str().unwrap(), MODEL);
        chain_ipf_string_free(out);
        chain_ipf_graph_free(g);
    }
}

fn target_dir() -> PathBuf {
    // tests/ffi-<hash> lives in target/<profile>/deps
    let exe = std::env::current_exe().unwrap();
    exe.parent().unwrap().parent().unwrap().to_path_buf()
}

#[test]
fn header_compiles_and_links_from_c() {
    let cc = match Command::new("cc").arg("--version").output() {
        Ok(o) if o.status.success() => "cc",
        _ => {
            eprintln!("no C compiler; skipping");
            return;
        }
    };
    let lib = target_dir().join("libchain_ipf_ffi.a");
    if !lib.exists() {
        eprintln!("{} not built; skipping", lib.display());
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("main.c");
    let model = dir.path().join("model.json");
    std::fs::write(&model, MODEL).unwrap();
    std::fs::write(
        &src,
        r#"
#include <stdio.h>
#include <stdlib.h>
#include "chain_ipf.h"

int main(int argc, char **argv) {
    FILE *f = fopen(argv[1], "rb");
    fseek(f, 0, SEEK_END);
    long n = ftell(f);
    rewind(f);
    char *buf = malloc(n + 1);
    fread(buf, 1, n, f);
    buf[n] = 0;
    fclose(f);
    ChainIpfGraph *g = NULL;
    if (chain_ipf_graph_from_json(buf, &g) != CHAIN_IPF_STATUS_OK) {
        fprintf(stderr, "%s\n", chain_ipf_last_error());
        return 1;
    }
    size_t config[4] = {0, 0, 0, 0};
    double p = 0.0;
    if (chain_ipf_joint_probability(g, config, 4, &p) != CHAIN_IPF_STATUS_OK) return 1;
    if (chain_ipf_graph_from_json("{", &g) != CHAIN_IPF_STATUS_SCHEMA) return 2;
    printf("%.17g\n", p);
    chain_ipf_graph_free(g);
    free(buf);
    return 0;
}
"#,
    )
    .unwrap();
    let exe = dir.path().join("main");
    let include = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("include");
    let status = Command::new(cc)
        .arg(&src)
        .arg("-I")
        .arg(&include)
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .status()
        .unwrap();
    assert!(status.success());
    let out = Command::new(&exe).arg(&model).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let p: f64 = String::from_utf8(out.stdout).unwrap().trim().parse().unwrap();
    assert_eq!(p, 1.0 / 64.0);
}
