//! `securexam`: operator tool for keys, packages, rosters, schedules,
//! sittings and results.
//!
//! Exit codes: 0 on success, 1 when the operation fails (the error envelope
//! is printed on stdout), 2 on usage errors.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use chrono::{DateTime, Duration, Utc};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use securexam::exam::{validate_exam_with_limit, ExamDraft, DEFAULT_RESOURCE_LIMIT};
use securexam::package::PublicKey;
use securexam::schedule::{read_roster_csv, PlanRequest, VenueProfile};
use securexam::{filter_eligible, generate_keypair, package_fingerprint, plan_sittings, seal_exam, ExamPackage, KeyPair, KeyRole};
use securexam_service::wire::{CardIssued, CardRequest, SittingOpened};
use securexam_service::{ApiError, CandidateStore, QuestionStore, ServiceConfig};

#[derive(Parser)]
#[command(name = "securexam", version, about = "Operator tool for the exam platform")]
struct Cli {
    /// Service config file; the same file the server reads.
    #[arg(long, global = true, env = "SECUREXAM_CONFIG")]
    config: Option<PathBuf>,
    /// Print machine-readable JSON on stdout.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a lecturer or centre key pair.
    Keygen(KeygenArgs),
    /// Check an exam authoring file.
    Validate(ValidateArgs),
    /// Sign and encrypt an exam for one or more centres.
    Seal(SealArgs),
    /// Print the fingerprint of a sealed package.
    Fingerprint(FingerprintArgs),
    /// Load a roster CSV into the candidate store.
    IngestRoster(IngestArgs),
    /// Filter a roster by cutoff and plan sittings.
    Plan(PlanArgs),
    /// Ask the running service to open a sitting.
    OpenSitting(OpenArgs),
    /// Issue scratch cards through the running service.
    IssueCards(CardsArgs),
    /// Write the results CSV for an exam from the candidate store.
    ExportResults(ExportArgs),
    /// Print the audit log.
    AuditDump(AuditArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum RoleArg {
    Lecturer,
    Center,
}

#[derive(Args)]
struct KeygenArgs {
    #[arg(long, value_enum)]
    role: RoleArg,
    /// Output prefix; writes PREFIX.key and PREFIX.pub.
    #[arg(long)]
    out: PathBuf,
    /// Also register the public key as an authorized author in the
    /// configured question store (lecturer keys only).
    #[arg(long)]
    register: bool,
}

#[derive(Args)]
struct ValidateArgs {
    #[arg(long = "exam", value_name = "FILE")]
    exam_flag: Option<PathBuf>,
    #[arg(value_name = "FILE", conflicts_with = "exam_flag")]
    exam: Option<PathBuf>,
}

#[derive(Args)]
struct SealArgs {
    #[arg(long)]
    exam: PathBuf,
    /// Lecturer private key.
    #[arg(long)]
    author: PathBuf,
    /// Centre public key; repeat for several centres.
    #[arg(long = "recipient", required = true)]
    recipients: Vec<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// Timestamp recorded in the manifest (RFC 3339); defaults to now.
    #[arg(long)]
    created_at: Option<DateTime<Utc>>,
}

#[derive(Args)]
struct FingerprintArgs {
    #[arg(long = "package", value_name = "FILE")]
    package_flag: Option<PathBuf>,
    #[arg(value_name = "FILE", conflicts_with = "package_flag")]
    package: Option<PathBuf>,
}

#[derive(Args)]
struct IngestArgs {
    #[arg(long)]
    roster: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum VenueArg {
    LanCenter,
    ByodDistributed,
}

#[derive(Args)]
struct PlanArgs {
    #[arg(long)]
    roster: PathBuf,
    #[arg(long)]
    cutoff: i64,
    /// Seats per sitting; defaults to the configured capacity.
    #[arg(long)]
    capacity: Option<u32>,
    #[arg(long, default_value = "exam")]
    exam_id: String,
    /// Start of the first sitting (RFC 3339); defaults to 09:00 UTC tomorrow.
    #[arg(long)]
    first_start: Option<DateTime<Utc>>,
    #[arg(long, default_value_t = 4)]
    days: u32,
    #[arg(long, default_value_t = 4)]
    per_day: u32,
    /// Minutes between sittings in a day; 0 runs them concurrently.
    #[arg(long, default_value_t = 120)]
    interval_minutes: i64,
    #[arg(long, value_enum, default_value = "lan-center")]
    venue: VenueArg,
    /// Persist the schedule to the configured question store.
    #[arg(long)]
    save: bool,
}

#[derive(Args)]
struct ServerArgs {
    /// Service base URL; defaults to the configured bind address and port.
    #[arg(long)]
    server: Option<String>,
    /// Admin bearer token; defaults to the configured one.
    #[arg(long, env = "SECUREXAM_ADMIN_TOKEN", hide_env_values = true)]
    admin_token: Option<String>,
}

#[derive(Args)]
struct OpenArgs {
    #[arg(long)]
    sitting: String,
    #[command(flatten)]
    server: ServerArgs,
}

#[derive(Args)]
struct CardsArgs {
    #[arg(long)]
    exam: String,
    /// Candidate to issue for; repeatable.
    #[arg(long = "reg-no")]
    reg_nos: Vec<String>,
    /// Issue for every candidate with a score for the exam in the
    /// candidate store.
    #[arg(long, conflicts_with = "reg_nos")]
    all: bool,
    #[command(flatten)]
    server: ServerArgs,
}

#[derive(Args)]
struct ExportArgs {
    #[arg(long)]
    exam: String,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct AuditArgs {
    /// Only events with a sequence number above this.
    #[arg(long, default_value_t = 0)]
    since: u64,
}

type Outcome = Result<(Value, String), ApiError>;

fn io_err(path: &Path, e: std::io::Error) -> ApiError {
    ApiError::new(1, "IoError", format!("{}: {e}", path.display()))
}

fn read(path: &Path) -> Result<Vec<u8>, ApiError> {
    fs::read(path).map_err(|e| io_err(path, e))
}

fn write(path: &Path, bytes: &[u8]) -> Result<(), ApiError> {
    fs::write(path, bytes).map_err(|e| io_err(path, e))
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("wire types serialize")
}

fn load_config(path: Option<&Path>) -> Result<ServiceConfig, ApiError> {
    ServiceConfig::load(path).map_err(|e| ApiError::new(1, "ConfigError", e.to_string()))
}

fn keygen(args: &KeygenArgs, config: &ServiceConfig) -> Outcome {
    let role = match args.role {
        RoleArg::Lecturer => KeyRole::Lecturer,
        RoleArg::Center => KeyRole::Center,
    };
    if args.register && role != KeyRole::Lecturer {
        return Err(ApiError::new(1, "KeyFormat", "only lecturer keys can be registered as authors"));
    }
    let pair = generate_keypair(role)?;
    let private = args.out.with_extension("key");
    let public = args.out.with_extension("pub");
    write(&private, &pair.to_private_bytes())?;
    write(&public, &pair.public().to_bytes())?;
    if args.register {
        let store = QuestionStore::open(&config.question_store).map_err(|e| io_err(&config.question_store, e))?;
        store.register_key(pair.public()).map_err(|e| io_err(&config.question_store, e))?;
    }
    let key_id = pair.key_id().to_hex();
    let v = json!({
        "key_id": key_id,
        "role": match role { KeyRole::Lecturer => "lecturer", KeyRole::Center => "center" },
        "private_key": private,
        "public_key": public,
        "registered": args.register,
    });
    Ok((v, format!("key {key_id} written to {} and {}", private.display(), public.display())))
}

fn load_draft(path: &Path) -> Result<ExamDraft, ApiError> {
    Ok(ExamDraft::from_file(path)?)
}

fn validate(path: &Path) -> Outcome {
    let exam = validate_exam_with_limit(&load_draft(path)?, DEFAULT_RESOURCE_LIMIT)?;
    let essays = exam.questions().len() - exam.objective_count();
    let v = json!({
        "exam_id": exam.exam_id(),
        "course_code": exam.course_code(),
        "questions": exam.questions().len(),
        "objective": exam.objective_count(),
        "essays": essays,
        "resources": exam.resources().len(),
        "duration_minutes": exam.duration_minutes(),
        "max_total": exam.max_total(),
    });
    Ok((
        v,
        format!(
            "{}: valid, {} questions ({} objective, {essays} essay), {} resources, {} marks",
            exam.exam_id(),
            exam.questions().len(),
            exam.objective_count(),
            exam.resources().len(),
            exam.max_total()
        ),
    ))
}

fn seal(args: &SealArgs) -> Outcome {
    let exam = validate_exam_with_limit(&load_draft(&args.exam)?, DEFAULT_RESOURCE_LIMIT)?;
    let author = KeyPair::from_private_bytes(&read(&args.author)?)?;
    if author.role() != KeyRole::Lecturer {
        return Err(ApiError::new(1, "KeyFormat", "the author key must be a lecturer key"));
    }
    let recipients = args
        .recipients
        .iter()
        .map(|p| Ok(PublicKey::from_bytes(&read(p)?)?))
        .collect::<Result<Vec<_>, ApiError>>()?;
    let pkg = seal_exam(&exam, &author, &recipients, args.created_at.unwrap_or_else(Utc::now))?;
    let bytes = pkg.to_bytes();
    write(&args.out, &bytes)?;
    let fp = package_fingerprint(&pkg).to_hex();
    let v = json!({
        "package_id": fp,
        "exam_id": exam.exam_id(),
        "recipients": recipients.len(),
        "bytes": bytes.len(),
        "out": args.out,
    });
    Ok((v, format!("sealed {} for {} centre(s): {fp}", exam.exam_id(), recipients.len())))
}

fn fingerprint(path: &Path) -> Outcome {
    let pkg = ExamPackage::from_bytes(&read(path)?)?;
    let fp = package_fingerprint(&pkg).to_hex();
    let m = pkg.manifest();
    let v = json!({ "package_id": fp, "exam_id": m.exam_id, "created_at": m.created_at });
    Ok((v, fp))
}

fn read_roster(path: &Path) -> Result<Vec<securexam::CandidateRecord>, ApiError> {
    let file = fs::File::open(path).map_err(|e| io_err(path, e))?;
    Ok(read_roster_csv(file)?)
}

fn ingest(args: &IngestArgs, config: &ServiceConfig) -> Outcome {
    let roster = read_roster(&args.roster)?;
    let store = CandidateStore::open(&config.candidate_store).map_err(|e| io_err(&config.candidate_store, e))?;
    store.put_roster(&roster).map_err(|e| io_err(&config.candidate_store, e))?;
    let v = json!({ "candidates": roster.len(), "candidate_store": config.candidate_store });
    Ok((v, format!("{} candidates stored", roster.len())))
}

fn plan(args: &PlanArgs, config: &ServiceConfig) -> Outcome {
    let roster = read_roster(&args.roster)?;
    let eligible = filter_eligible(&roster, args.cutoff);
    let first_start = args.first_start.unwrap_or_else(|| {
        let tomorrow = Utc::now().date_naive() + Duration::days(1);
        tomorrow.and_hms_opt(9, 0, 0).expect("valid time").and_utc()
    });
    let req = PlanRequest {
        exam_id: args.exam_id.clone(),
        capacity: args.capacity.unwrap_or(config.capacity_default),
        days_available: args.days,
        sittings_per_day: args.per_day,
        first_start,
        slot_interval: Duration::minutes(args.interval_minutes),
        venue_profile: match args.venue {
            VenueArg::LanCenter => VenueProfile::LanCenter,
            VenueArg::ByodDistributed => VenueProfile::ByodDistributed,
        },
    };
    let schedule = plan_sittings(&eligible, &req)?;
    if args.save {
        let store = QuestionStore::open(&config.question_store).map_err(|e| io_err(&config.question_store, e))?;
        store.put_schedule(&args.exam_id, &schedule).map_err(|e| io_err(&config.question_store, e))?;
    }
    let mut text = format!(
        "{} of {} candidates eligible at cutoff {}; {} sittings",
        eligible.len(),
        roster.len(),
        args.cutoff,
        schedule.sittings.len()
    );
    for s in &schedule.sittings {
        text.push_str(&format!("\n  {} {} {} seats {}/{}", s.sitting_id, s.course_code, s.start_time.to_rfc3339(), s.assigned.len(), s.capacity));
    }
    let v = json!({
        "roster": roster.len(),
        "eligible": eligible.len(),
        "sittings": schedule.sittings.len(),
        "saved": args.save,
        "schedule": schedule,
    });
    Ok((v, text))
}

struct Client {
    base: String,
    token: String,
    http: reqwest::blocking::Client,
}

impl Client {
    fn new(args: &ServerArgs, config: &ServiceConfig) -> Self {
        let base = args.server.clone().unwrap_or_else(|| format!("http://{}:{}", config.bind, config.port));
        Self {
            base: base.trim_end_matches('/').to_string(),
            token: args.admin_token.clone().unwrap_or_else(|| config.admin_token.clone()),
            http: reqwest::blocking::Client::new(),
        }
    }

    fn post(&self, path: &str, body: Option<Value>) -> Result<Value, ApiError> {
        let mut req = self.http.post(format!("{}{path}", self.base)).bearer_auth(&self.token).header("x-actor", "admin-cli");
        if let Some(b) = body {
            req = req.json(&b);
        }
        let resp = req
            .send()
            .map_err(|e| ApiError::new(1, "ServiceUnreachable", format!("{}: {e}", self.base)).retriable())?;
        let ok = resp.status().is_success();
        let status = resp.status().as_u16();
        let v: Value = resp
            .json()
            .map_err(|e| ApiError::new(1, "BadResponse", format!("status {status}: {e}")))?;
        if ok {
            Ok(v)
        } else {
            let mut err: ApiError = serde_json::from_value(v)
                .unwrap_or_else(|_| ApiError::new(status, "BadResponse", format!("status {status}")));
            err.status = status;
            Err(err)
        }
    }
}

fn open_sitting(args: &OpenArgs, config: &ServiceConfig) -> Outcome {
    let client = Client::new(&args.server, config);
    let v = client.post(&format!("/v1/sittings/{}/open", args.sitting), None)?;
    let opened: SittingOpened = serde_json::from_value(v.clone())
        .map_err(|e| ApiError::new(1, "BadResponse", e.to_string()))?;
    let img = &opened.security_image;
    Ok((v, format!("{} open; security image #{} ({}) code {}", opened.sitting_id, img.image_index, img.glyph, img.confirm_code)))
}

fn issue_cards(args: &CardsArgs, config: &ServiceConfig) -> Result<(Value, String, bool), ApiError> {
    let reg_nos = if args.all {
        let store = CandidateStore::open(&config.candidate_store).map_err(|e| io_err(&config.candidate_store, e))?;
        let mut regs: Vec<String> = store
            .results()
            .map_err(|e| io_err(&config.candidate_store, e))?
            .scores
            .into_iter()
            .filter(|s| s.exam_id == args.exam)
            .map(|s| s.reg_no)
            .collect();
        regs.sort();
        regs
    } else {
        args.reg_nos.clone()
    };
    if reg_nos.is_empty() {
        return Err(ApiError::new(2, "Usage", "name candidates with --reg-no or use --all"));
    }
    let client = Client::new(&args.server, config);
    let mut issued = Vec::new();
    let mut refused = Vec::new();
    for reg in &reg_nos {
        let body = to_value(&CardRequest { reg_no: reg.clone(), exam_id: args.exam.clone() });
        match client.post("/v1/cards", Some(body)) {
            Ok(v) => issued.push(serde_json::from_value::<CardIssued>(v).map_err(|e| ApiError::new(1, "BadResponse", e.to_string()))?),
            Err(e) if e.code == "ServiceUnreachable" => return Err(e),
            Err(e) => refused.push(json!({ "reg_no": reg, "error": e })),
        }
    }
    let mut text = format!("{} issued, {} refused", issued.len(), refused.len());
    for c in &issued {
        text.push_str(&format!("\n  {} card {} PIN {} released from {}", c.reg_no, c.card_id, c.pin, c.release_time.to_rfc3339()));
    }
    for r in &refused {
        text.push_str(&format!("\n  {} refused: {}", r["reg_no"].as_str().unwrap_or(""), r["error"]["code"].as_str().unwrap_or("")));
    }
    let all_ok = refused.is_empty();
    Ok((json!({ "issued": issued, "refused": refused }), text, all_ok))
}

fn export_results(args: &ExportArgs, config: &ServiceConfig) -> Outcome {
    let store = CandidateStore::open(&config.candidate_store).map_err(|e| io_err(&config.candidate_store, e))?;
    let mut scores: Vec<_> = store
        .results()
        .map_err(|e| io_err(&config.candidate_store, e))?
        .scores
        .into_iter()
        .filter(|s| s.exam_id == args.exam)
        .collect();
    scores.sort_by(|a, b| a.reg_no.cmp(&b.reg_no));
    let mut buf = Vec::new();
    securexam::grading::write_results_csv(&scores, &mut buf).map_err(|e| ApiError::new(1, "IoError", e.to_string()))?;
    write(&args.out, &buf)?;
    let finals = scores.iter().filter(|s| s.status == securexam::ScoreStatus::Final).count();
    let v = json!({ "exam_id": args.exam, "rows": scores.len(), "final": finals, "out": args.out });
    Ok((v, format!("{} rows ({finals} final) written to {}", scores.len(), args.out.display())))
}

fn audit_dump(args: &AuditArgs, config: &ServiceConfig) -> Outcome {
    let path = config.candidate_store.join("audit.jsonl");
    let log = securexam::AuditLog::open(&path).map_err(|e| io_err(&path, e))?;
    let events: Vec<_> = log.events().into_iter().filter(|e| e.seq > args.since).collect();
    let text = events
        .iter()
        .map(|e| format!("{:>6} {} {}:{} {} {} {}", e.seq, e.at.to_rfc3339(), e.actor.role, e.actor.id, e.action, e.subject, e.outcome))
        .collect::<Vec<_>>()
        .join("\n");
    Ok((to_value(&events), text))
}

fn run(cli: &Cli) -> Result<(Value, String, bool), ApiError> {
    let config = || load_config(cli.config.as_deref());
    let done = |r: Outcome| r.map(|(v, t)| (v, t, true));
    match &cli.command {
        Command::Keygen(a) => done(keygen(a, &config()?)),
        Command::Validate(a) => {
            let path = a.exam_flag.as_ref().or(a.exam.as_ref()).ok_or_else(|| ApiError::new(2, "Usage", "validate needs an exam file"))?;
            done(validate(path))
        }
        Command::Seal(a) => done(seal(a)),
        Command::Fingerprint(a) => {
            let path = a.package_flag.as_ref().or(a.package.as_ref()).ok_or_else(|| ApiError::new(2, "Usage", "fingerprint needs a package file"))?;
            done(fingerprint(path))
        }
        Command::IngestRoster(a) => done(ingest(a, &config()?)),
        Command::Plan(a) => done(plan(a, &config()?)),
        Command::OpenSitting(a) => done(open_sitting(a, &config()?)),
        Command::IssueCards(a) => issue_cards(a, &config()?),
        Command::ExportResults(a) => done(export_results(a, &config()?)),
        Command::AuditDump(a) => done(audit_dump(a, &config()?)),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok((v, text, all_ok)) => {
            if cli.json {
                println!("{}", serde_json::to_string_pretty(&v).expect("json"));
            } else if !text.is_empty() {
                println!("{text}");
            }
            if all_ok {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            println!("{}", serde_json::to_string(&e).expect("json"));
            if !cli.json {
                eprintln!("error: {}: {}", e.code, e.message);
            }
            if e.code == "Usage" {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
