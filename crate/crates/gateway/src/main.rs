use std::fs::File;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand, ValueEnum};
use ledgerquote_core::bench::{read_samples, render_table};
use ledgerquote_core::cost::{cost_svg, emit_cost_curves, write_cost_csv, Scenario};
use ledgerquote_core::ohlcv::write_candles_csv;
use ledgerquote_gateway::adapter::{ChainAdapter, OhlcvQuery, ParseInput};
use ledgerquote_gateway::api::{parse_bases, parse_input, parse_time};
use ledgerquote_gateway::config::ENV_LISTEN_ADDR;
use ledgerquote_gateway::docs::{ParseDoc, PriceDoc, SwapDoc};
use ledgerquote_gateway::{adapters_from_config, api, app_state, ServiceConfig, SolanaAdapter};
use tracing_subscriber::EnvFilter;

#[derive(Parser)]
#[command(name = "ledgerquote", version, about = "Token prices, candles and swap decoding from raw Solana blocks")]
struct Cli {
    /// Service config (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Recorded block fixture (JSON lines).
    #[arg(long, global = true)]
    fixtures: Option<PathBuf>,
    /// JSON-RPC endpoint.
    #[arg(long, global = true, env = "CHAIN_RPC_URL")]
    rpc_url: Option<String>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum ScenarioArg {
    Stream,
    Event,
}

#[derive(Subcommand)]
enum Cmd {
    /// Price of a mint at a timestamp, as JSON.
    Price {
        #[arg(long)]
        mint: String,
        /// Unix seconds or RFC 3339.
        #[arg(long)]
        t: String,
        /// Comma-separated preference list, e.g. USDC,SOL.
        #[arg(long)]
        base: Option<String>,
    },
    /// OHLCV candles as CSV.
    Ohlcv {
        #[arg(long)]
        mint: String,
        #[arg(long)]
        from: String,
        #[arg(long)]
        to: String,
        #[arg(long, default_value_t = 60)]
        interval: i64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Decode a swap from a signature or a transaction document file.
    Parse {
        signature: Option<String>,
        #[arg(long, conflicts_with = "signature")]
        file: Option<PathBuf>,
    },
    /// Cost curves as CSV.
    Cost {
        #[arg(long, value_enum, default_value = "stream")]
        scenario: ScenarioArg,
        /// Last hour of the curve.
        #[arg(long, default_value_t = 48.0)]
        hours: f64,
        #[arg(long, default_value_t = 1.0)]
        step: f64,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write an SVG chart here.
        #[arg(long)]
        plot: Option<PathBuf>,
    },
    /// Error table for predicted vs reference prices.
    Bench {
        #[arg(long)]
        input: PathBuf,
    },
    /// Run the HTTP service.
    Serve {
        #[arg(long, env = ENV_LISTEN_ADDR)]
        listen: Option<String>,
    },
}

impl Cli {
    fn service_config(&self) -> anyhow::Result<ServiceConfig> {
        let mut cfg = match &self.config {
            Some(p) => ServiceConfig::load(p)?,
            None => ServiceConfig::default(),
        };
        cfg.apply_env(|k| std::env::var(k).ok());
        if let Some(f) = &self.fixtures {
            cfg.source.fixture_path = Some(f.clone());
        }
        if let Some(u) = &self.rpc_url {
            cfg.source.endpoint_url = Some(u.clone());
        }
        Ok(cfg)
    }
}

fn output(path: &Option<PathBuf>) -> anyhow::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(File::create(p).with_context(|| format!("creating {}", p.display()))?),
        None => Box::new(io::stdout().lock()),
    })
}

fn print_json<T: serde::Serialize>(v: &T) -> anyhow::Result<()> {
    println!("{}", serde_json::to_string_pretty(v)?);
    Ok(())
}

fn hours(max: f64, step: f64) -> anyhow::Result<Vec<f64>> {
    if !(step > 0.0 && max >= 0.0 && max.is_finite()) {
        bail!("need --hours ≥ 0 and --step > 0");
    }
    let n = (max / step + 1e-9).floor() as usize;
    Ok((0..=n).map(|i| i as f64 * step).collect())
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let cfg = cli.service_config()?;
    match &cli.cmd {
        Cmd::Price { mint, t, base } => {
            let adapter = SolanaAdapter::from_config(&cfg)?;
            let q = ledgerquote_gateway::adapter::PriceQuery {
                mint: mint.clone(),
                t: parse_time(t)?,
                bases: parse_bases(base.as_deref())?,
            };
            print_json(&PriceDoc::from(&adapter.price(&q)?))
        }
        Cmd::Ohlcv {
            mint,
            from,
            to,
            interval,
            out,
        } => {
            let adapter = SolanaAdapter::from_config(&cfg)?;
            let candles = adapter.ohlcv(&OhlcvQuery {
                mint: mint.clone(),
                from: parse_time(from)?,
                to: parse_time(to)?,
                interval: *interval,
            })?;
            write_candles_csv(output(out)?, &candles)?;
            Ok(())
        }
        Cmd::Parse { signature, file } => {
            let input = match (signature, file) {
                (Some(s), None) => ParseInput::Signature(s.clone()),
                (None, Some(p)) => parse_input(&std::fs::read(p).with_context(|| format!("reading {}", p.display()))?)?,
                _ => bail!("give a signature or --file"),
            };
            let adapter = SolanaAdapter::from_config(&cfg)?;
            let info = adapter.parse(&input)?;
            print_json(&ParseDoc {
                swap_info: SwapDoc::from(&info),
            })
        }
        Cmd::Cost {
            scenario,
            hours: max,
            step,
            out,
            plot,
        } => {
            let scenario = match scenario {
                ScenarioArg::Stream => Scenario::Stream,
                ScenarioArg::Event => Scenario::Event,
            };
            let rows = emit_cost_curves(scenario, &hours(*max, *step)?, &cfg.cost);
            write_cost_csv(output(out)?, &rows)?;
            if let Some(p) = plot {
                let title = match scenario {
                    Scenario::Stream => "Streaming analysis cost (USD)",
                    Scenario::Event => "Event analysis cost (USD)",
                };
                std::fs::write(p, cost_svg(&rows, title)).with_context(|| format!("writing {}", p.display()))?;
            }
            Ok(())
        }
        Cmd::Bench { input } => {
            let f = File::open(input).with_context(|| format!("opening {}", input.display()))?;
            print!("{}", render_table(&read_samples(f)?)?);
            Ok(())
        }
        Cmd::Serve { listen } => {
            let mut cfg = cfg;
            if let Some(l) = listen {
                cfg.listen_address = l.clone();
            }
            cfg.validate()?;
            let state = app_state(adapters_from_config(&cfg)?, &cfg.health);
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(async {
                let listener = tokio::net::TcpListener::bind(&cfg.listen_address)
                    .await
                    .with_context(|| format!("binding {}", cfg.listen_address))?;
                api::serve(listener, state, async {
                    let _ = tokio::signal::ctrl_c().await;
                })
                .await?;
                Ok(())
            })
        }
    }
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("info")))
        .with_writer(io::stderr)
        .init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
