use std::fs;
use std::io::{self, Write};
use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use hcie::bench::{self, BenchConfig};
use hcie::hill::DEFAULT_DIM_LOG2;
use hcie::rsa::{self, KeyProfile};
use hcie::transfer::{self, SendOptions, Server, ServerConfig, TrustStore};
use hcie::{seal, Envelope, RsaPrivateKey, RsaPublicKey, Signature};
use rand::rngs::OsRng;

/// Smallest key size accepted without `--insecure`.
const MIN_SECURE_BITS: u64 = 1024;

#[derive(Debug, Parser)]
#[command(
    name = "hcie",
    version,
    about = "Hybrid Hill/RSA file encryption and transfer"
)]
struct Cli {
    /// Allow keys shorter than 1024 bits.
    #[arg(long, global = true)]
    insecure: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a key pair as PATH.pub and PATH.key.
    Keygen {
        #[arg(long, default_value_t = 2048)]
        bits: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Encrypt and sign a file into an envelope.
    Seal {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Recipient public key.
        #[arg(long)]
        to: PathBuf,
        /// Sender private key.
        #[arg(long)]
        from: PathBuf,
        #[arg(long, default_value_t = DEFAULT_DIM_LOG2)]
        dim_log2: u32,
    },
    /// Decrypt an envelope and check the sender's signature.
    Open {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Recipient private key.
        #[arg(long)]
        to: PathBuf,
        /// Sender public key.
        #[arg(long)]
        from: PathBuf,
    },
    /// Sign a file with a private key.
    Sign {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        key: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Check a signature made by `sign`.
    Verify {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        key: PathBuf,
        #[arg(long)]
        sig: PathBuf,
    },
    /// Seal a file and deliver it to a running `recv`.
    Send {
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        #[arg(long)]
        port: u16,
        #[arg(long)]
        file: PathBuf,
        #[arg(long)]
        to: PathBuf,
        #[arg(long)]
        from: PathBuf,
        #[command(flatten)]
        net: NetArgs,
        #[arg(long, default_value_t = DEFAULT_DIM_LOG2)]
        dim_log2: u32,
    },
    /// Accept sealed files from trusted senders.
    Recv {
        #[arg(long, default_value = "0.0.0.0")]
        host: String,
        /// 0 picks a free port; the bound address is printed.
        #[arg(long)]
        port: u16,
        #[arg(long)]
        out_dir: PathBuf,
        /// Recipient private key.
        #[arg(long)]
        key: PathBuf,
        /// Directory of trusted sender `.pub` files.
        #[arg(long)]
        trust: PathBuf,
        /// Exit after one connection.
        #[arg(long)]
        once: bool,
        #[command(flatten)]
        net: NetArgs,
    },
    /// Compare throughput of hill_only, rsa_only, and hybrid.
    Bench {
        /// Comma-separated payload sizes; `k` and `m` suffixes mean KiB and MiB.
        #[arg(long, value_delimiter = ',', value_parser = parse_size)]
        sizes: Vec<usize>,
        /// CSV output path, `-` for stdout.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 3)]
        repetitions: usize,
        #[arg(long, default_value_t = 1024)]
        rsa_bits: u64,
    },
}

#[derive(Debug, Args)]
struct NetArgs {
    /// Inactivity timeout in seconds.
    #[arg(long, default_value_t = transfer::DEFAULT_TIMEOUT.as_secs())]
    timeout: u64,
}

/// Marks failures that should exit with the usage status.
#[derive(Debug)]
struct Usage(String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    Usage(msg.into()).into()
}

fn parse_size(s: &str) -> Result<usize, String> {
    let lower = s.trim().to_ascii_lowercase();
    let (digits, scale) = match lower.strip_suffix('m') {
        Some(d) => (d, 1 << 20),
        None => match lower.strip_suffix('k') {
            Some(d) => (d, 1 << 10),
            None => (lower.as_str(), 1),
        },
    };
    digits
        .parse::<usize>()
        .ok()
        .and_then(|n| n.checked_mul(scale))
        .ok_or_else(|| format!("invalid size {s:?}"))
}

struct Keys {
    insecure: bool,
}

impl Keys {
    fn check_bits(&self, bits: u64, path: &Path) -> Result<()> {
        if bits < MIN_SECURE_BITS && !self.insecure {
            bail!(
                "{}: {bits}-bit key is below {MIN_SECURE_BITS} bits; pass --insecure to use it",
                path.display()
            );
        }
        Ok(())
    }

    fn public(&self, path: &Path) -> Result<RsaPublicKey> {
        let text = read_text(path)?;
        let key = RsaPublicKey::from_key_file(&text)
            .with_context(|| format!("{}: not a public key", path.display()))?;
        self.check_bits(key.modulus().bits(), path)?;
        Ok(key)
    }

    fn private(&self, path: &Path) -> Result<RsaPrivateKey> {
        let text = read_text(path)?;
        let key = RsaPrivateKey::from_key_file(&text, KeyProfile::Insecure)
            .with_context(|| format!("{}: not a private key", path.display()))?;
        self.check_bits(key.modulus().bits(), path)?;
        Ok(key)
    }
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).with_context(|| format!("cannot read {}", path.display()))
}

fn write_bytes(path: &Path, data: &[u8]) -> Result<()> {
    fs::write(path, data).with_context(|| format!("cannot write {}", path.display()))
}

fn with_suffix(base: &Path, ext: &str) -> PathBuf {
    let mut s = base.as_os_str().to_owned();
    s.push(ext);
    PathBuf::from(s)
}

/// Refuses to replace an existing file.
fn create_new(path: &Path, data: &[u8]) -> Result<()> {
    let mut f = fs::OpenOptions::new()
        .write(true)
        .create_new(true)
        .open(path)
        .with_context(|| format!("cannot create {}", path.display()))?;
    f.write_all(data)
        .with_context(|| format!("cannot write {}", path.display()))
}

fn run(cli: Cli) -> Result<()> {
    let keys = Keys {
        insecure: cli.insecure,
    };
    match cli.command {
        Command::Keygen { bits, out } => {
            if bits < MIN_SECURE_BITS && !cli.insecure {
                return Err(usage(format!(
                    "refusing to generate a {bits}-bit key; pass --insecure for keys below {MIN_SECURE_BITS} bits"
                )));
            }
            let profile = if cli.insecure {
                KeyProfile::Insecure
            } else {
                KeyProfile::Standard
            };
            let (public, private) = rsa::keygen(bits, profile, &mut OsRng)?;
            let (pub_path, key_path) = (with_suffix(&out, ".pub"), with_suffix(&out, ".key"));
            create_new(&key_path, private.to_key_file().as_bytes())?;
            create_new(&pub_path, public.to_key_file().as_bytes())?;
            println!("{}", public.fingerprint());
        }
        Command::Seal {
            input,
            out,
            to,
            from,
            dim_log2,
        } => {
            let recipient = keys.public(&to)?;
            let sender = keys.private(&from)?;
            let data = read_bytes(&input)?;
            let env = seal(
                &data,
                &recipient,
                &sender,
                &sender.public_key(),
                &mut OsRng,
                dim_log2,
            )?;
            write_bytes(&out, &env.serialize())?;
        }
        Command::Open {
            input,
            out,
            to,
            from,
        } => {
            let recipient = keys.private(&to)?;
            let sender = keys.public(&from)?;
            let env = Envelope::parse(&read_bytes(&input)?)
                .with_context(|| format!("{}", input.display()))?;
            let plaintext = env.open(&recipient, &sender)?;
            write_bytes(&out, &plaintext)?;
        }
        Command::Sign { input, key, out } => {
            let private = keys.private(&key)?;
            let sig = rsa::sign(&private, &read_bytes(&input)?)?;
            let bytes = sig
                .to_bytes(private.size())
                .expect("signature below modulus");
            write_bytes(&out, format!("{}\n", hex::encode(&bytes)).as_bytes())?;
        }
        Command::Verify { input, key, sig } => {
            let public = keys.public(&key)?;
            let text = read_text(&sig)?;
            let bytes = hex::decode(text.trim())
                .ok()
                .with_context(|| format!("{}: not a hex signature", sig.display()))?;
            if !rsa::verify(
                &public,
                &read_bytes(&input)?,
                &Signature::from_bytes(&bytes),
            ) {
                bail!("signature verification failed");
            }
            println!("signature ok");
        }
        Command::Send {
            host,
            port,
            file,
            to,
            from,
            net,
            dim_log2,
        } => {
            let recipient = keys.public(&to)?;
            let sender = keys.private(&from)?;
            let options = SendOptions {
                dim_log2,
                timeout: Duration::from_secs(net.timeout),
                ..SendOptions::default()
            };
            let ack = transfer::send_file(
                (host.as_str(), port),
                &file,
                &recipient,
                &sender,
                &mut OsRng,
                &options,
            )?;
            println!("delivered {} sha256 {}", file.display(), ack.digest);
        }
        Command::Recv {
            host,
            port,
            out_dir,
            key,
            trust,
            once,
            net,
        } => {
            let recipient = keys.private(&key)?;
            let trust = TrustStore::load_dir(&trust)?;
            if trust.is_empty() {
                bail!("no trusted sender keys found");
            }
            fs::create_dir_all(&out_dir)
                .with_context(|| format!("cannot create {}", out_dir.display()))?;
            let listener = TcpListener::bind((host.as_str(), port))
                .with_context(|| format!("cannot listen on {host}:{port}"))?;
            println!("listening on {}", listener.local_addr()?);
            io::stdout().flush()?;
            let server = Server::new(recipient, trust, out_dir).with_config(ServerConfig {
                timeout: Duration::from_secs(net.timeout),
                ..ServerConfig::default()
            });
            if once {
                let (stream, _) = listener.accept()?;
                let received = server.handle(stream)?;
                println!(
                    "stored {} sha256 {}",
                    received.path.display(),
                    received.digest
                );
            } else {
                server.serve(&listener)?;
            }
        }
        Command::Bench {
            sizes,
            out,
            repetitions,
            rsa_bits,
        } => {
            if sizes.is_empty() {
                return Err(usage("--sizes needs at least one size"));
            }
            if let Some(s) = sizes.iter().find(|&&s| s < bench::MIN_PAYLOAD) {
                return Err(usage(format!(
                    "payload size {s} is below the {}-byte minimum",
                    bench::MIN_PAYLOAD
                )));
            }
            let config = BenchConfig {
                repetitions,
                rsa_bits,
                ..BenchConfig::default()
            };
            let records = bench::run_bench_with(&sizes, &mut OsRng, &config)?;
            if out == Path::new("-") {
                bench::write_csv(&records, io::stdout().lock())?;
            } else {
                let f = fs::File::create(&out)
                    .with_context(|| format!("cannot create {}", out.display()))?;
                bench::write_csv(&records, io::BufWriter::new(f))?;
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("hcie: {e:#}");
            if e.downcast_ref::<Usage>().is_some() {
                ExitCode::from(1)
            } else {
                ExitCode::from(2)
            }
        }
    }
}
