use std::io::{BufRead, BufReader};
use std::path::PathBuf;
use std::process::{Child, Command, Output, Stdio};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_swarmgrid"))
}

fn config(name: &str, body: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("swarmgrid-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Result lines with the timing field removed.
fn results(o: &Output) -> Vec<String> {
    stdout(o)
        .lines()
        .filter(|l| l.starts_with("RESULT,") || l.starts_with("ARG,"))
        .map(|l| {
            if l.starts_with("RESULT,") {
                l.rsplit_once(',').unwrap().0.to_owned()
            } else {
                l.to_owned()
            }
        })
        .collect()
}

#[test]
fn mc_run_reports_budget() {
    let c = config("mc.cfg", "# mc\nfunction,str,sphere\ndim,int,2\nmethod,str,mc\nbudget,int,10\n");
    let o = run(&["run", "--config", c.to_str().unwrap(), "--seed", "4"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let line = stdout(&o).lines().next().unwrap().to_owned();
    let f: Vec<&str> = line.split(',').collect();
    assert_eq!(&f[..5], ["RESULT", "mc", "sphere", "2", "4"]);
    assert_eq!(f[6], "10");
    assert!(stdout(&o).lines().nth(1).unwrap().starts_with("ARG,"));
}

#[test]
fn missing_key_exits_2() {
    let c = config("nodim.cfg", "function,str,sphere\nmethod,str,mc\n");
    let o = run(&["run", "--config", c.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("dim"), "{}", stderr(&o));
}

#[test]
fn config_errors_exit_2() {
    let c = config("bad.cfg", "function,str,sphere\nde.pop,real,abc\n");
    let o = run(&["run", "--config", c.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 2"), "{}", stderr(&o));
    let c = config("unk.cfg", "function,str,sphere\ndim,int,2\nmethod,str,zz\n");
    assert_eq!(run(&["run", "--config", c.to_str().unwrap()]).status.code(), Some(2));
    assert_eq!(run(&["run", "--config", "/nonexistent/x.cfg"]).status.code(), Some(2));
}

#[test]
fn unreachable_server_exits_3() {
    let c = config("d.cfg", "function,str,sphere\ndim,int,2\nmethod,str,mc\nbudget,int,10\n");
    let o = run(&["run", "--config", c.to_str().unwrap(), "--dist", "127.0.0.1:1"]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
}

#[test]
fn repeated_runs_print_identical_lines() {
    let c = config(
        "de.cfg",
        "function,str,rosenbrock\ndim,int,6\nmethod,str,de\nbudget,int,4000\nde.pop,int,20\nthreads,int,2\nreps,int,2\n",
    );
    let a = run(&["run", "--config", c.to_str().unwrap()]);
    let b = run(&["run", "--config", c.to_str().unwrap()]);
    assert!(a.status.success(), "{}", stderr(&a));
    assert_eq!(results(&a).len(), 4);
    assert_eq!(results(&a), results(&b));
}

#[test]
fn compare_self_is_tie() {
    let o = run(&[
        "compare", "--suite", "sphere,ackley", "--methods", "mc,mc", "--reps", "2", "--dim", "3", "--budget", "100",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).lines().any(|l| l == "MATRIX,mc,mc,tie,"), "{}", stdout(&o));
    let o = run(&["compare", "--suite", "nope", "--methods", "mc,ga"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn speedup_table() {
    let c = config("sp.cfg", "function,str,sphere\ndim,int,4\nmethod,str,de\nbudget,int,2000\nde.pop,int,20\n");
    let o = run(&["speedup", "--config", c.to_str().unwrap(), "--threads", "1,2"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let rows: Vec<String> = stdout(&o).lines().filter(|l| l.starts_with("SPEEDUP,")).map(String::from).collect();
    assert_eq!(rows.len(), 2);
    assert!(rows[0].ends_with(",1.00,1.00"), "{}", rows[0]);
    assert!(stdout(&o).contains("Efficiency"));
    let o = run(&["speedup", "--config", c.to_str().unwrap(), "--threads", "2,4"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn presets_are_printed() {
    let o = run(&["presets"]);
    assert!(stdout(&o).contains("presets.version,int,1"));
}

struct Kill(Child);

impl Drop for Kill {
    fn drop(&mut self) {
        let _ = self.0.kill();
        let _ = self.0.wait();
    }
}

#[test]
fn distributed_run_matches_local_run() {
    let mut server = bin()
        .args(["server", "--bind", "127.0.0.1", "--client-port", "0", "--worker-port", "0", "--timeout", "10"])
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    let mut line = String::new();
    BufReader::new(server.stdout.take().unwrap()).read_line(&mut line).unwrap();
    let _server = Kill(server);
    let parts: Vec<&str> = line.trim().split(',').collect();
    assert_eq!(parts[0], "LISTEN", "{line}");
    let (client, worker) = (parts[1].to_owned(), parts[2].to_owned());
    let _workers: Vec<Kill> = (0..2)
        .map(|_| Kill(bin().args(["worker", "--server", &worker, "--threads", "2"]).spawn().unwrap()))
        .collect();
    std::thread::sleep(std::time::Duration::from_millis(500));
    let c = config(
        "ga.cfg",
        "function,str,rastrigin\ndim,int,5\nmethod,str,ga\nbudget,int,3000\nga.popsize,int,30\nga.islands,int,2\nseed,int,11\n",
    );
    let local = run(&["run", "--config", c.to_str().unwrap()]);
    let remote = run(&["run", "--config", c.to_str().unwrap(), "--dist", &client]);
    assert!(remote.status.success(), "{}", stderr(&remote));
    assert_eq!(results(&local), results(&remote));
}
