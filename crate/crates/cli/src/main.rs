use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use touchlink_core::session::{benchmark_default, render_frame, serve, ServeConfig, FRAME_BUDGET};
use touchlink_core::spatial_calib::SiteConfig;
use touchlink_core::{run_scenario, RasterDump, Scenario, SiteId};

#[derive(Parser)]
#[command(name = "touchlink", version, about = "Touch emulation for two-site 3D video calls")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Play a scenario and write the event trace as JSON lines.
    Simulate {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        trace: PathBuf,
        /// Overrides the scenario seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run the live session behind a WebSocket endpoint.
    Serve {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 8765)]
        port: u16,
    },
    /// Render the frame a site shows at a given time.
    RenderFrame {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long = "t")]
        t_ms: i64,
        /// Raster dump, or PNG when the name ends in .png.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = Site::A)]
        site: Site,
    },
    /// Fit the tracker-to-site transform from recorded calibration touches.
    Calibrate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Time receiver frames against the frame budget.
    Bench {
        #[arg(long, default_value_t = 300)]
        frames: usize,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Site {
    A,
    B,
}

impl From<Site> for SiteId {
    fn from(s: Site) -> Self {
        match s {
            Site::A => SiteId::A,
            Site::B => SiteId::B,
        }
    }
}

fn load_scenario(path: &Path) -> Result<Scenario> {
    Scenario::load(path).with_context(|| format!("loading scenario {}", path.display()))
}

fn simulate(scenario: &Path, trace: &Path, seed: Option<u64>) -> Result<()> {
    let mut s = load_scenario(scenario)?;
    if let Some(seed) = seed {
        s = s.with_seed(seed);
    }
    let t = run_scenario(&s)?;
    t.write_to(trace).with_context(|| format!("writing {}", trace.display()))?;
    println!("records {}", t.records.len());
    println!("touches {}", t.touches().len());
    println!("sha256 {}", t.hash());
    Ok(())
}

fn render(scenario: &Path, t_ms: i64, out: &Path, site: SiteId) -> Result<()> {
    let s = load_scenario(scenario)?;
    let img = render_frame(&s, t_ms, site)?;
    let is_png = out
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("png"));
    if is_png {
        std::fs::write(out, img.to_png()?)?;
    } else {
        let f = BufWriter::new(File::create(out)?);
        RasterDump::from_rgb(&img).write_to(f)?;
    }
    println!("{}x{} site {site} t {t_ms} hash {}", img.width, img.height, img.hash_hex());
    Ok(())
}

fn calibrate(config: &Path) -> Result<()> {
    let site = SiteConfig::load(config).with_context(|| format!("loading {}", config.display()))?;
    let report = site.calibrate()?;
    let t = &report.tracker_to_site;
    let v = t.translation.vector;
    println!("translation [{:.6}, {:.6}, {:.6}]", v.x, v.y, v.z);
    let m = t.rotation.matrix();
    for r in 0..3 {
        println!("rotation [{:.6}, {:.6}, {:.6}]", m[(r, 0)], m[(r, 1)], m[(r, 2)]);
    }
    println!("rmse {:.6}", report.rmse);
    let worst = report.residuals.iter().cloned().fold(0.0, f64::max);
    println!("max residual {worst:.6}");
    Ok(())
}

fn bench(frames: usize) -> Result<bool> {
    let b = benchmark_default(frames)?;
    let ms = |d: std::time::Duration| d.as_secs_f64() * 1e3;
    println!("frames {}", b.timings.len());
    println!("median {:.3} ms", ms(b.median()));
    println!("p90 {:.3} ms", ms(b.p90()));
    println!("max {:.3} ms", ms(b.max()));
    println!("budget {:.0} ms", ms(FRAME_BUDGET));
    if !b.within_budget() {
        eprintln!("median frame time over budget");
    }
    Ok(b.within_budget())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate { scenario, trace, seed } => simulate(&scenario, &trace, seed).map(|_| true),
        Command::Serve { config, port } => (|| {
            let c = ServeConfig::load(&config).with_context(|| format!("loading {}", config.display()))?;
            let handle = serve(c, port)?;
            println!("listening on ws://{}", handle.addr);
            handle.wait();
            Ok(true)
        })(),
        Command::RenderFrame { scenario, t_ms, out, site } => render(&scenario, t_ms, &out, site.into()).map(|_| true),
        Command::Calibrate { config } => calibrate(&config).map(|_| true),
        Command::Bench { frames } => bench(frames),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
