//! Protocol mock for the child-process backend.
//!
//! Usage: `mock-simplifier [MODE]...` where MODE is one of
//!
//! * `echo` (default): answer with the input text
//! * `mark`: prepend `<SIMP> ` to every text
//! * `drop=K`: never answer request id K
//! * `fail=K`: answer request id K with an error
//! * `reverse=N`: buffer N requests, then answer them in reverse order
//! * `no-ready`: skip the READY handshake
//! * `exit-code=N`: exit with N once stdin closes

use std::io::{self, BufRead, Write};

use serde_json::{json, Value};

fn main() {
    let mut mark = false;
    let mut drop = None;
    let mut fail = None;
    let mut reverse = 1usize;
    let mut ready = true;
    let mut exit_code = 0;
    for arg in std::env::args().skip(1) {
        match arg.split_once('=') {
            None if arg == "echo" => {}
            None if arg == "mark" => mark = true,
            Some(("reverse", n)) => reverse = n.parse::<usize>().unwrap_or(1).max(1),
            None if arg == "no-ready" => ready = false,
            Some(("drop", k)) => drop = k.parse::<u64>().ok(),
            Some(("fail", k)) => fail = k.parse::<u64>().ok(),
            Some(("exit-code", n)) => exit_code = n.parse().unwrap_or(1),
            _ => {
                eprintln!("mock-simplifier: unknown mode {arg}");
                std::process::exit(2);
            }
        }
    }

    let stdout = io::stdout();
    let mut out = stdout.lock();
    if ready {
        writeln!(out, "READY").unwrap();
        out.flush().unwrap();
    }

    let stdin = io::stdin();
    let mut input = stdin.lock();
    let mut pending = Vec::new();
    let mut line = String::new();
    loop {
        line.clear();
        let n = input.read_line(&mut line).unwrap_or(0);
        if n > 0 {
            pending.push(answer(&line, mark, drop, fail));
        }
        if n == 0 || pending.len() >= reverse {
            pending.reverse();
            for response in pending.drain(..).flatten() {
                writeln!(out, "{response}").unwrap();
            }
            out.flush().unwrap();
        }
        if n == 0 {
            break;
        }
    }
    std::process::exit(exit_code);
}

fn answer(line: &str, mark: bool, drop: Option<u64>, fail: Option<u64>) -> Option<Value> {
    let request: Value = match serde_json::from_str(line) {
        Ok(v) => v,
        Err(_) => return Some(json!({"id": null, "error": "malformed request"})),
    };
    let id = request["id"].as_u64();
    let text = request["text"].as_str().unwrap_or_default();
    if id.is_some() && id == drop {
        return None;
    }
    if id.is_some() && id == fail {
        return Some(json!({"id": id, "text": text, "error": "model failure"}));
    }
    let text = if mark {
        format!("<SIMP> {text}")
    } else {
        text.to_string()
    };
    Some(json!({"id": id, "text": text}))
}
