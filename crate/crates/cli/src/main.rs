use std::process::ExitCode;
use std::time::Duration;

use clap::{Parser, Subcommand};

use swarmgrid::exec_dist::{Server, ServerConfig, TaskRegistry, Worker, DEFAULT_CLIENT_PORT, DEFAULT_WORKER_PORT};
use swarmgrid::harness::{
    self, compare, read_config, run_once, run_speedup, speedup_lines, speedup_table, suite, CompareSpec,
    HarnessError, RunConfig,
};
use swarmgrid::{Error, ParamMap};

#[derive(Parser)]
#[command(name = "swarmgrid", version, about = "Parallel and distributed global optimization")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run one optimizer as described by a config file.
    Run {
        #[arg(long)]
        config: String,
        /// Overrides the config's `seed`.
        #[arg(long)]
        seed: Option<u64>,
        /// Evaluate through the server at host:port.
        #[arg(long)]
        dist: Option<String>,
    },
    /// Time one config at several thread counts.
    Speedup {
        #[arg(long)]
        config: String,
        #[arg(long, value_delimiter = ',', default_value = "1,2,4")]
        threads: Vec<usize>,
    },
    /// Pairwise comparison of methods over a function suite.
    Compare {
        /// `desk` or a comma-separated list of functions.
        #[arg(long, default_value = "desk")]
        suite: String,
        #[arg(long, value_delimiter = ',', required = true)]
        methods: Vec<String>,
        #[arg(long, default_value_t = 10)]
        reps: usize,
        #[arg(long, default_value_t = 50)]
        dim: usize,
        /// Evaluations per run; default 1000 per dimension.
        #[arg(long)]
        budget: Option<u64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Runs executed concurrently.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        /// Extra keys applied to every run.
        #[arg(long)]
        config: Option<String>,
    },
    /// Print the built-in method presets.
    Presets,
    /// Start a server node.
    Server {
        #[arg(long, default_value_t = DEFAULT_CLIENT_PORT)]
        client_port: u16,
        #[arg(long, default_value_t = DEFAULT_WORKER_PORT)]
        worker_port: u16,
        #[arg(long, default_value = "0.0.0.0")]
        bind: String,
        /// Client address of another server to forward requests to.
        #[arg(long = "peer")]
        peers: Vec<String>,
        /// Workers must run the init command before taking work.
        #[arg(long)]
        inited: bool,
        /// Seconds a request waits for a free worker.
        #[arg(long)]
        timeout: Option<f64>,
    },
    /// Start a worker node.
    Worker {
        #[arg(long)]
        server: String,
        #[arg(long, default_value_t = 1)]
        threads: usize,
    },
}

fn dist_keys(p: &mut ParamMap, addr: &str) -> Result<(), HarnessError> {
    let bad = || Error::InvalidConfig {
        key: "--dist".into(),
        reason: format!("`{addr}` is not host:port"),
    };
    let (host, port) = addr.rsplit_once(':').ok_or_else(bad)?;
    let port: u16 = port.parse().map_err(|_| bad())?;
    p.set("dist.server.host", host);
    p.set("dist.server.port", i64::from(port));
    Ok(())
}

fn execute(cmd: Cmd) -> Result<(), HarnessError> {
    match cmd {
        Cmd::Run { config, seed, dist } => {
            let mut p = read_config(&config)?;
            if let Some(s) = seed {
                p.set("seed", s as i64);
            }
            if let Some(a) = dist {
                dist_keys(&mut p, &a)?;
            }
            let cfg = RunConfig::from_params(p)?;
            for r in 0..cfg.reps as u64 {
                let rep = run_once(&cfg, cfg.seed + r)?;
                println!("{}", rep.result_line());
                println!("{}", rep.arg_line());
            }
        }
        Cmd::Speedup { config, threads } => {
            let cfg = RunConfig::from_params(read_config(&config)?)?;
            let rows = run_speedup(&cfg, &threads)?;
            for l in speedup_lines(&rows) {
                println!("{l}");
            }
            print!("{}", speedup_table(&rows));
        }
        Cmd::Compare {
            suite: s,
            methods,
            reps,
            dim,
            budget,
            seed,
            jobs,
            alpha,
            config,
        } => {
            let mut spec = CompareSpec::new(suite(&s)?, methods);
            spec.reps = reps;
            spec.dim = dim;
            spec.budget = budget;
            spec.seed = seed;
            spec.jobs = jobs;
            spec.alpha = alpha;
            if let Some(c) = config {
                spec.overrides = read_config(c)?;
            }
            let report = compare(&spec)?;
            for l in report.csv_lines() {
                println!("{l}");
            }
            print!("{}", report.table());
        }
        Cmd::Presets => print!("{}", harness::PRESETS_TEXT),
        Cmd::Server {
            client_port,
            worker_port,
            bind,
            peers,
            inited,
            timeout,
        } => {
            let mut cfg = ServerConfig {
                client_addr: format!("{bind}:{client_port}"),
                worker_addr: format!("{bind}:{worker_port}"),
                ..ServerConfig::default()
            }
            .with_peers(peers)
            .inited(inited);
            if let Some(t) = timeout {
                cfg = cfg.with_timeout(Duration::from_secs_f64(t));
            }
            let server = Server::start(cfg).map_err(Error::from)?;
            log::info!(
                "server {} listening: clients {}, workers {}",
                server.id(),
                server.client_addr(),
                server.worker_addr()
            );
            println!("LISTEN,{},{}", server.client_addr(), server.worker_addr());
            server.join();
        }
        Cmd::Worker { server, threads } => {
            Worker::run(&server, threads.max(1), TaskRegistry::standard()).map_err(Error::from)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("SWARMGRID_LOG", "warn")).init();
    let cli = Cli::parse();
    match execute(cli.cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
