//! Drives the command-line front end in-process: writes an instance file,
//! then runs `member`, `intersect` and `lowerbound` and prints exit codes.

use std::fs;

use cvas_regular::cli::run;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::env::temp_dir().join(format!("cvasreg-example-{}", std::process::id()));
    fs::create_dir_all(&dir)?;
    let inst = dir.join("pipeline.cvas");
    fs::write(
        &inst,
        "dimension 3\ntransition a 1 0 0\ntransition b -1 1 0\ntransition c 0 -1 1\nsource 0 0 0\ntarget 0 1/4 1/4\n",
    )?;
    let re = dir.join("a-then-bc.nfa");
    fs::write(&re, "regex a(b|c)*\n")?;
    let inst = inst.to_str().unwrap();
    let re = re.to_str().unwrap();
    let sessions: [&[&str]; 4] = [
        &["cvasreg", "member", inst, "abbc", "--witness"],
        &["cvasreg", "member", inst, "bbc"],
        &["cvasreg", "intersect", inst, re, "--witness"],
        &["cvasreg", "lowerbound", "1", "2", "brute"],
    ];
    let (mut out, mut err) = (std::io::stdout(), std::io::stderr());
    for args in sessions {
        println!("$ {}", args.join(" "));
        let code = run(args.iter().copied(), &mut out, &mut err);
        println!("(exit {code})");
    }
    fs::remove_dir_all(&dir)?;
    Ok(())
}
