// crysgen: dataset ingestion, training, hybrid sampling, and evaluation for
// the proposer + diffusion crystal generation pipeline.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>

#include <CLI11.hpp>
#include <json.hpp>

#include "crysgen/config.hpp"
#include "crysgen/dataset.hpp"
#include "crysgen/errors.hpp"
#include "crysgen/metrics.hpp"
#include "crysgen/records.hpp"
#include "crysgen/sampler.hpp"
#include "crysgen/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace crysgen;

namespace {

void guard_output(const std::string& path, bool force) {
  if (!force && fs::exists(path)) {
    throw IoError("refusing to overwrite " + path + " (use --force)");
  }
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << content;
  if (!out) throw IoError("failed writing: " + path);
}

json null_if_nan(double v) {
  if (std::isnan(v)) return nullptr;
  return v;
}

// Minimal CSV reader handling quoted multi-line fields.
std::vector<std::vector<std::string>> read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open csv file: " + path);
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool quoted = false;
  char ch;
  bool any = false;
  while (in.get(ch)) {
    any = true;
    if (quoted) {
      if (ch == '"') {
        if (in.peek() == '"') {
          in.get(ch);
          field += '"';
        } else {
          quoted = false;
        }
      } else {
        field += ch;
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      row.push_back(field);
      field.clear();
    } else if (ch == '\n') {
      row.push_back(field);
      field.clear();
      rows.push_back(row);
      row.clear();
    } else if (ch != '\r') {
      field += ch;
    }
  }
  if (any && (!field.empty() || !row.empty())) {
    row.push_back(field);
    rows.push_back(row);
  }
  return rows;
}

// --- option resolution: CLI flag > config file > default ---------------------

struct Resolver {
  const FileConfig* fc = nullptr;
  std::string section;

  void apply(CLI::Option* opt, std::string& var, const char* key) const {
    if (fc && opt->count() == 0 && fc->has(section, key)) {
      var = fc->get_string(section, key, var);
    }
  }
  void apply(CLI::Option* opt, double& var, const char* key) const {
    if (fc && opt->count() == 0 && fc->has(section, key)) {
      var = fc->get_double(section, key, var);
    }
  }
  template <typename Int>
  void apply_int(CLI::Option* opt, Int& var, const char* key) const {
    if (fc && opt->count() == 0 && fc->has(section, key)) {
      var = static_cast<Int>(fc->get_int(section, key, static_cast<long long>(var)));
    }
  }
  void apply(CLI::Option* opt, bool& var, const char* key) const {
    if (fc && opt->count() == 0 && fc->has(section, key)) {
      var = fc->get_bool(section, key, var);
    }
  }
};

// --- ingest -------------------------------------------------------------------

struct IngestOpts {
  std::string input, format = "records", out_dir = ".";
  std::uint64_t seed = 0;
  bool force = false;
};

std::vector<Crystal> load_csv_crystals(const std::string& path) {
  const auto rows = read_csv(path);
  if (rows.empty()) throw ValidationError("csv file has no header row: " + path);
  const auto& header = rows.front();
  int cif_col = -1;
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == "cif") cif_col = static_cast<int>(i);
  }
  if (cif_col < 0) throw ValidationError("csv file lacks a 'cif' column: " + path);
  std::vector<Crystal> out;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    if (rows[r].size() <= static_cast<std::size_t>(cif_col)) {
      throw ValidationError(path + ": record " + std::to_string(r) + ": missing cif field");
    }
    try {
      out.push_back(parse_crystal_text(rows[r][static_cast<std::size_t>(cif_col)]));
    } catch (const ValidationError& e) {
      throw ValidationError(path + ": record " + std::to_string(r) + ": " + e.what());
    }
  }
  return out;
}

int cmd_ingest(const IngestOpts& o, const json& run_config) {
  std::vector<Crystal> all;
  if (o.format == "records") {
    all = read_record_file(o.input);
  } else if (o.format == "csv") {
    all = load_csv_crystals(o.input);
  } else {
    throw ValidationError("unknown ingest format: " + o.format);
  }
  if (all.empty()) throw ValidationError("input contains no records: " + o.input);

  const SplitIndices split = split_dataset(all.size(), o.seed);
  const std::string train_path = o.out_dir + "/train.jsonl";
  const std::string val_path = o.out_dir + "/val.jsonl";
  const std::string test_path = o.out_dir + "/test.jsonl";
  const std::string manifest_path = o.out_dir + "/split_manifest.json";
  for (const auto& p : {train_path, val_path, test_path, manifest_path}) {
    guard_output(p, o.force);
  }

  auto pick = [&](const std::vector<std::size_t>& idx) {
    std::vector<Crystal> out;
    out.reserve(idx.size());
    for (auto i : idx) out.push_back(all[i]);
    return out;
  };
  write_record_file(train_path, pick(split.train));
  write_record_file(val_path, pick(split.val));
  write_record_file(test_path, pick(split.test));

  json manifest;
  manifest["run_config"] = run_config;
  manifest["n_total"] = all.size();
  manifest["splits"] = {
      {"train", {{"path", train_path}, {"count", split.train.size()}, {"indices", split.train}}},
      {"val", {{"path", val_path}, {"count", split.val.size()}, {"indices", split.val}}},
      {"test", {{"path", test_path}, {"count", split.test.size()}, {"indices", split.test}}}};
  write_text_file(manifest_path, manifest.dump(2) + "\n");
  std::cout << "ingest: " << all.size() << " records -> " << split.train.size() << "/"
            << split.val.size() << "/" << split.test.size() << "\n";
  return 0;
}

// --- train ---------------------------------------------------------------------

struct TrainOpts {
  std::string data, out = "model.ckpt", proposer_out = "proposer.bin",
              loss_log = "loss_log.jsonl", component = "both", resume;
  TrainConfig cfg;
  int markov_order = 6;
  int max_attempts = 16;
  bool force = false;
};

int cmd_train(const TrainOpts& o, const json& run_config) {
  const auto dataset = read_record_file(o.data);
  const bool want_diffusion = o.component == "both" || o.component == "diffusion";
  const bool want_proposer = o.component == "both" || o.component == "proposer";
  if (!want_diffusion && !want_proposer) {
    throw ValidationError("component must be one of both|diffusion|proposer");
  }

  if (want_proposer) {
    guard_output(o.proposer_out, o.force);
    const MarkovProposer mp = train_markov_proposer(dataset, o.markov_order, o.max_attempts);
    mp.save(o.proposer_out);
    std::cout << "proposer: order " << o.markov_order << " sidecar -> " << o.proposer_out
              << "\n";
  }

  if (want_diffusion) {
    guard_output(o.out, o.force);
    guard_output(o.loss_log, o.force);
    std::ofstream log(o.loss_log);
    if (!log) throw IoError("cannot open loss log: " + o.loss_log);

    TrainSinks sinks;
    sinks.on_step = [&](std::uint64_t step, const StepLosses& l) {
      json line = {{"step", step}, {"loss_coord", l.coord}, {"loss_lattice", l.lattice}};
      log << line.dump() << "\n";
    };
    sinks.on_checkpoint = [&](const Checkpoint& ck) {
      save_checkpoint(o.out + ".step" + std::to_string(ck.step), ck);
    };

    Checkpoint final = o.resume.empty()
                           ? train(o.cfg, dataset, sinks)
                           : resume_train(load_checkpoint(o.resume), dataset, sinks);
    save_checkpoint(o.out, final);
    write_text_file(o.out + ".runconfig.json", run_config.dump(2) + "\n");
    std::cout << "diffusion: " << final.step << " steps, checkpoint -> " << o.out << "\n";
  }
  return 0;
}

// --- sample ----------------------------------------------------------------------

struct SampleOpts {
  std::string checkpoint, proposer_spec, out = "generated.jsonl", condition, trace_out;
  int n = 1;
  int tau = -1;
  int inference_steps = 900;
  double step_size = 1e-5;
  std::uint64_t seed = 0;
  int max_attempts = 16;
  int jobs = 1;
  bool force = false;
};

std::unique_ptr<Proposer> proposer_from_spec(const std::string& spec, int max_attempts) {
  const auto colon = spec.find(':');
  if (colon == std::string::npos) {
    throw ValidationError("proposer spec must look like kind:path, got '" + spec + "'");
  }
  ProposerConfig cfg;
  const std::string kind = spec.substr(0, colon);
  cfg.path = spec.substr(colon + 1);
  cfg.max_attempts = max_attempts;
  if (kind == "markov") {
    cfg.kind = ProposerConfig::Kind::Markov;
  } else if (kind == "file") {
    cfg.kind = ProposerConfig::Kind::File;
  } else if (kind == "template") {
    cfg.kind = ProposerConfig::Kind::Template;
  } else {
    throw ValidationError("unknown proposer kind: " + kind);
  }
  return make_proposer(cfg);
}

Prompt prompt_from_condition(const std::string& condition) {
  if (condition.empty()) return build_prompt_unconditional();
  const auto eq = condition.find('=');
  if (eq == std::string::npos) {
    throw ValidationError("condition must look like composition=NaCl or spacegroup=225");
  }
  const std::string kind = condition.substr(0, eq);
  const std::string value = condition.substr(eq + 1);
  if (kind == "composition") return build_prompt_composition(value);
  if (kind == "spacegroup") return build_prompt_space_group(std::stoi(value));
  throw ValidationError("unknown condition kind: " + kind);
}

int cmd_sample(const SampleOpts& o, const json& run_config) {
  guard_output(o.out, o.force);
  const std::string report_path = o.out + ".report.json";
  guard_output(report_path, o.force);
  if (!o.trace_out.empty()) guard_output(o.trace_out, o.force);

  const Checkpoint ck = load_checkpoint(o.checkpoint);
  const SamplerModel model = model_from_checkpoint(ck);
  const auto proposer = proposer_from_spec(o.proposer_spec, o.max_attempts);
  const Prompt prompt = prompt_from_condition(o.condition);

  SamplerConfig cfg;
  cfg.tau = o.tau;
  cfg.step_size = o.step_size;
  cfg.inference_steps = o.inference_steps;
  cfg.seed = o.seed;
  cfg.record_trace = !o.trace_out.empty();

  const BatchResult batch = generate_batch(prompt, o.n, *proposer, model, cfg, o.jobs);

  std::vector<Crystal> crystals;
  crystals.reserve(batch.materials.size());
  for (const auto& m : batch.materials) crystals.push_back(m.crystal);
  write_record_file(o.out, crystals);

  json report;
  report["run_config"] = run_config;
  report["requested"] = batch.report.requested;
  report["generated"] = batch.report.generated;
  report["failed"] = batch.report.failed;
  report["proposal_attempts"] = batch.report.proposal_attempts;
  report["proposals_rejected"] = batch.report.proposals_rejected;
  json failures = json::array();
  for (const auto& [idx, why] : batch.report.failures) {
    failures.push_back({{"index", idx}, {"error", why}});
  }
  report["failures"] = failures;
  write_text_file(report_path, report.dump(2) + "\n");

  if (!o.trace_out.empty()) {
    std::ofstream tr(o.trace_out);
    if (!tr) throw IoError("cannot open trace output: " + o.trace_out);
    for (std::size_t i = 0; i < batch.materials.size(); ++i) {
      const auto& m = batch.materials[i];
      json steps = json::array();
      for (const auto& e : m.trace) {
        steps.push_back({{"t", e.t}, {"coord_step", e.coord_step}, {"lattice_step", e.lattice_step}});
      }
      tr << json{{"index", i}, {"tau", m.tau_used}, {"seed", m.seed}, {"trace", steps}}.dump()
         << "\n";
    }
  }

  std::cout << "sample: " << batch.report.generated << "/" << batch.report.requested
            << " materials -> " << o.out << "\n";
  if (batch.report.generated == 0) {
    throw ValidationError("no materials generated (see " + report_path + ")");
  }
  return 0;
}

// --- evaluate ----------------------------------------------------------------------

struct EvaluateOpts {
  std::string gen, ref, mode = "gen", out = "report";
  MatchTolerances tol;
  double fp_threshold = EvalThresholds{}.fingerprint_threshold;
  bool emit_hist = false;
  int jobs = 1;
  bool force = false;
};

void write_histogram_csv(const std::string& path, const std::vector<double>& gen,
                         const std::vector<double>& ref, int bins) {
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (double v : gen) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  for (double v : ref) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  if (!(hi > lo)) hi = lo + 1.0;
  const double width = (hi - lo) / bins;
  std::vector<int> hg(static_cast<std::size_t>(bins), 0), hr(static_cast<std::size_t>(bins), 0);
  auto fill = [&](const std::vector<double>& vs, std::vector<int>& h) {
    for (double v : vs) {
      const int b = std::min(bins - 1, static_cast<int>((v - lo) / width));
      h[static_cast<std::size_t>(b)] += 1;
    }
  };
  fill(gen, hg);
  fill(ref, hr);
  std::ostringstream os;
  os << "bin_lo,bin_hi,count_gen,count_ref\n";
  for (int b = 0; b < bins; ++b) {
    os << lo + b * width << "," << lo + (b + 1) * width << "," << hg[static_cast<std::size_t>(b)]
       << "," << hr[static_cast<std::size_t>(b)] << "\n";
  }
  write_text_file(path, os.str());
}

int cmd_evaluate(const EvaluateOpts& o, const json& run_config) {
  const std::string json_path = o.out + ".json";
  const std::string table_path = o.out + ".txt";
  guard_output(json_path, o.force);
  guard_output(table_path, o.force);

  const auto gen = read_record_file(o.gen);
  const auto ref = read_record_file(o.ref);
  const EvalMode mode = o.mode == "csp" ? EvalMode::Csp : EvalMode::Gen;
  if (o.mode != "csp" && o.mode != "gen") {
    throw ValidationError("mode must be gen or csp");
  }
  EvalThresholds thresholds;
  thresholds.fingerprint_threshold = o.fp_threshold;

  const MetricsReport r = evaluate(gen, ref, o.tol, thresholds, mode, o.jobs);

  json out;
  out["run_config"] = run_config;
  out["structural_validity"] = r.structural_validity_pct;
  out["compositional_validity"] = r.compositional_validity_pct;
  out["cov_recall"] = r.cov_recall_pct;
  out["cov_precision"] = r.cov_precision_pct;
  out["emd_density"] = r.emd_density;
  out["emd_nelem"] = r.emd_nelem;
  out["match_rate"] = r.match_rate_pct;
  out["rmse_mean"] = null_if_nan(r.rmse_mean);
  out["composition_match"] = null_if_nan(r.composition_match_pct);
  out["n_generated"] = r.n_generated;
  out["n_reference"] = r.n_reference;
  out["fingerprint_threshold"] = r.fingerprint_threshold;
  write_text_file(json_path, out.dump(2) + "\n");
  write_text_file(table_path, report_table(r));

  if (o.emit_hist) {
    std::vector<double> dg, dr, ng, nr;
    for (const auto& c : gen) {
      dg.push_back(density(c));
      ng.push_back(static_cast<double>(std::set<int>(c.atom_types.begin(), c.atom_types.end()).size()));
    }
    for (const auto& c : ref) {
      dr.push_back(density(c));
      nr.push_back(static_cast<double>(std::set<int>(c.atom_types.begin(), c.atom_types.end()).size()));
    }
    write_histogram_csv(o.out + "_density.csv", dg, dr, 32);
    write_histogram_csv(o.out + "_nelem.csv", ng, nr, 32);
  }

  std::cout << report_table(r);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"hybrid proposer + diffusion crystal structure generation"};
  app.require_subcommand(1);

  std::string config_path;
  bool force = false;
  app.add_option("--config", config_path, "TOML-style config file");
  app.add_flag("--force", force, "allow overwriting existing outputs");

  IngestOpts ing;
  auto* sub_ingest = app.add_subcommand("ingest", "validate records and write train/val/test");
  auto* ing_input = sub_ingest->add_option("--input", ing.input, "record or csv file");
  auto* ing_format = sub_ingest->add_option("--format", ing.format, "records|csv");
  auto* ing_outdir = sub_ingest->add_option("--out-dir", ing.out_dir, "output directory");
  auto* ing_seed = sub_ingest->add_option("--seed", ing.seed, "split shuffle seed");

  TrainOpts tr;
  auto* sub_train = app.add_subcommand("train", "train the proposer and/or diffusion model");
  auto* tr_data = sub_train->add_option("--data", tr.data, "training record file");
  auto* tr_out = sub_train->add_option("--out", tr.out, "checkpoint path");
  auto* tr_pout = sub_train->add_option("--proposer-out", tr.proposer_out, "markov sidecar path");
  auto* tr_log = sub_train->add_option("--loss-log", tr.loss_log, "JSON loss log path");
  auto* tr_comp = sub_train->add_option("--component", tr.component, "both|diffusion|proposer");
  auto* tr_resume = sub_train->add_option("--resume", tr.resume, "checkpoint to resume");
  auto* tr_steps = sub_train->add_option("--steps", tr.cfg.max_steps, "optimizer steps (overrides epochs)");
  auto* tr_epochs = sub_train->add_option("--epochs", tr.cfg.epochs, "epochs of shuffled batches");
  auto* tr_batch = sub_train->add_option("--batch-size", tr.cfg.batch_size, "crystals per step");
  auto* tr_lr = sub_train->add_option("--lr", tr.cfg.learning_rate, "Adam learning rate");
  auto* tr_t = sub_train->add_option("--T", tr.cfg.diffusion_steps, "diffusion steps");
  auto* tr_smin = sub_train->add_option("--sigma-min", tr.cfg.sigma_min, "coordinate sigma floor");
  auto* tr_smax = sub_train->add_option("--sigma-max", tr.cfg.sigma_max, "coordinate sigma cap");
  auto* tr_width = sub_train->add_option("--width", tr.cfg.net.width, "denoiser hidden width");
  auto* tr_freq = sub_train->add_option("--n-freq", tr.cfg.net.n_freq, "Fourier frequencies");
  auto* tr_layers = sub_train->add_option("--layers", tr.cfg.net.layers, "message-passing layers");
  auto* tr_std = sub_train->add_option("--standardize", tr.cfg.standardize_lattice,
                                       "standardize lattice entries");
  auto* tr_ckevery = sub_train->add_option("--checkpoint-every", tr.cfg.checkpoint_every,
                                           "periodic checkpoint interval");
  auto* tr_order = sub_train->add_option("--markov-order", tr.markov_order, "context length");
  auto* tr_seed = sub_train->add_option("--seed", tr.cfg.seed, "training seed");

  SampleOpts sa;
  auto* sub_sample = app.add_subcommand("sample", "propose and refine n materials");
  auto* sa_ck = sub_sample->add_option("--checkpoint", sa.checkpoint, "trained checkpoint");
  auto* sa_prop = sub_sample->add_option("--proposer", sa.proposer_spec, "kind:path");
  auto* sa_n = sub_sample->add_option("--n", sa.n, "number of materials");
  auto* sa_tau = sub_sample->add_option("--tau", sa.tau, "injection timestep (-1: T/10)");
  auto* sa_steps = sub_sample->add_option("--steps", sa.inference_steps, "inference steps at tau=T");
  auto* sa_step_size = sub_sample->add_option("--step-size", sa.step_size, "corrector scale");
  auto* sa_cond = sub_sample->add_option("--condition", sa.condition,
                                         "composition=<formula> or spacegroup=<n>");
  auto* sa_seed = sub_sample->add_option("--seed", sa.seed, "sampling seed");
  auto* sa_out = sub_sample->add_option("--out", sa.out, "generated record file");
  auto* sa_attempts = sub_sample->add_option("--max-attempts", sa.max_attempts, "proposer retries");
  auto* sa_jobs = sub_sample->add_option("--jobs", sa.jobs, "worker cap");
  auto* sa_trace = sub_sample->add_option("--trace-out", sa.trace_out, "per-sample trace JSONL");

  EvaluateOpts ev;
  auto* sub_eval = app.add_subcommand("evaluate", "score generated records against a reference");
  auto* ev_gen = sub_eval->add_option("--gen", ev.gen, "generated record file");
  auto* ev_ref = sub_eval->add_option("--ref", ev.ref, "reference record file");
  auto* ev_mode = sub_eval->add_option("--mode", ev.mode, "gen|csp");
  auto* ev_out = sub_eval->add_option("--out", ev.out, "report path prefix");
  auto* ev_stol = sub_eval->add_option("--stol", ev.tol.stol, "site tolerance");
  auto* ev_ltol = sub_eval->add_option("--ltol", ev.tol.ltol, "length tolerance fraction");
  auto* ev_atol = sub_eval->add_option("--angle-tol", ev.tol.angle_tol, "angle tolerance (deg)");
  auto* ev_fp = sub_eval->add_option("--fp-threshold", ev.fp_threshold, "coverage threshold");
  auto* ev_hist = sub_eval->add_flag("--emit-hist", ev.emit_hist, "write histogram CSVs");
  auto* ev_jobs = sub_eval->add_option("--jobs", ev.jobs, "worker cap");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    FileConfig fc;
    if (!config_path.empty()) fc = FileConfig::parse_file(config_path);

    if (sub_ingest->parsed()) {
      Resolver r{&fc, "ingest"};
      r.apply(ing_input, ing.input, "input");
      r.apply(ing_format, ing.format, "format");
      r.apply(ing_outdir, ing.out_dir, "out_dir");
      r.apply_int(ing_seed, ing.seed, "seed");
      ing.force = force;
      if (ing.input.empty()) throw ValidationError("ingest needs --input");
      json rc = {{"command", "ingest"}, {"input", ing.input},   {"format", ing.format},
                 {"out_dir", ing.out_dir}, {"seed", ing.seed}, {"force", ing.force}};
      return cmd_ingest(ing, rc);
    }
    if (sub_train->parsed()) {
      Resolver r{&fc, "train"};
      r.apply(tr_data, tr.data, "data");
      r.apply(tr_out, tr.out, "out");
      r.apply(tr_pout, tr.proposer_out, "proposer_out");
      r.apply(tr_log, tr.loss_log, "loss_log");
      r.apply(tr_comp, tr.component, "component");
      r.apply(tr_resume, tr.resume, "resume");
      r.apply_int(tr_steps, tr.cfg.max_steps, "steps");
      r.apply_int(tr_epochs, tr.cfg.epochs, "epochs");
      r.apply_int(tr_batch, tr.cfg.batch_size, "batch_size");
      r.apply(tr_lr, tr.cfg.learning_rate, "lr");
      r.apply_int(tr_t, tr.cfg.diffusion_steps, "T");
      r.apply(tr_smin, tr.cfg.sigma_min, "sigma_min");
      r.apply(tr_smax, tr.cfg.sigma_max, "sigma_max");
      r.apply_int(tr_width, tr.cfg.net.width, "width");
      r.apply_int(tr_freq, tr.cfg.net.n_freq, "n_freq");
      r.apply_int(tr_layers, tr.cfg.net.layers, "layers");
      r.apply(tr_std, tr.cfg.standardize_lattice, "standardize");
      r.apply_int(tr_ckevery, tr.cfg.checkpoint_every, "checkpoint_every");
      r.apply_int(tr_order, tr.markov_order, "markov_order");
      r.apply_int(tr_seed, tr.cfg.seed, "seed");
      tr.force = force;
      if (tr.data.empty()) throw ValidationError("train needs --data");
      json rc = {{"command", "train"},
                 {"data", tr.data},
                 {"out", tr.out},
                 {"proposer_out", tr.proposer_out},
                 {"loss_log", tr.loss_log},
                 {"component", tr.component},
                 {"resume", tr.resume},
                 {"steps", tr.cfg.max_steps},
                 {"epochs", tr.cfg.epochs},
                 {"batch_size", tr.cfg.batch_size},
                 {"lr", tr.cfg.learning_rate},
                 {"T", tr.cfg.diffusion_steps},
                 {"sigma_min", tr.cfg.sigma_min},
                 {"sigma_max", tr.cfg.sigma_max},
                 {"width", tr.cfg.net.width},
                 {"n_freq", tr.cfg.net.n_freq},
                 {"layers", tr.cfg.net.layers},
                 {"standardize", tr.cfg.standardize_lattice},
                 {"checkpoint_every", tr.cfg.checkpoint_every},
                 {"markov_order", tr.markov_order},
                 {"seed", tr.cfg.seed},
                 {"force", tr.force}};
      return cmd_train(tr, rc);
    }
    if (sub_sample->parsed()) {
      Resolver r{&fc, "sample"};
      r.apply(sa_ck, sa.checkpoint, "checkpoint");
      r.apply(sa_prop, sa.proposer_spec, "proposer");
      r.apply_int(sa_n, sa.n, "n");
      r.apply_int(sa_tau, sa.tau, "tau");
      r.apply_int(sa_steps, sa.inference_steps, "steps");
      r.apply(sa_step_size, sa.step_size, "step_size");
      r.apply(sa_cond, sa.condition, "condition");
      r.apply_int(sa_seed, sa.seed, "seed");
      r.apply(sa_out, sa.out, "out");
      r.apply_int(sa_attempts, sa.max_attempts, "max_attempts");
      r.apply_int(sa_jobs, sa.jobs, "jobs");
      r.apply(sa_trace, sa.trace_out, "trace_out");
      sa.force = force;
      if (sa.checkpoint.empty()) throw ValidationError("sample needs --checkpoint");
      if (sa.proposer_spec.empty()) throw ValidationError("sample needs --proposer");
      json rc = {{"command", "sample"},     {"checkpoint", sa.checkpoint},
                 {"proposer", sa.proposer_spec}, {"n", sa.n},
                 {"tau", sa.tau},           {"steps", sa.inference_steps},
                 {"step_size", sa.step_size},   {"condition", sa.condition},
                 {"seed", sa.seed},         {"out", sa.out},
                 {"max_attempts", sa.max_attempts}, {"jobs", sa.jobs},
                 {"trace_out", sa.trace_out},   {"force", sa.force}};
      return cmd_sample(sa, rc);
    }
    if (sub_eval->parsed()) {
      Resolver r{&fc, "evaluate"};
      r.apply(ev_gen, ev.gen, "gen");
      r.apply(ev_ref, ev.ref, "ref");
      r.apply(ev_mode, ev.mode, "mode");
      r.apply(ev_out, ev.out, "out");
      r.apply(ev_stol, ev.tol.stol, "stol");
      r.apply(ev_ltol, ev.tol.ltol, "ltol");
      r.apply(ev_atol, ev.tol.angle_tol, "angle_tol");
      r.apply(ev_fp, ev.fp_threshold, "fp_threshold");
      if (ev_hist->count() == 0 && fc.has("evaluate", "emit_hist")) {
        ev.emit_hist = fc.get_bool("evaluate", "emit_hist", ev.emit_hist);
      }
      r.apply_int(ev_jobs, ev.jobs, "jobs");
      ev.force = force;
      if (ev.gen.empty() || ev.ref.empty()) throw ValidationError("evaluate needs --gen and --ref");
      json rc = {{"command", "evaluate"}, {"gen", ev.gen},
                 {"ref", ev.ref},       {"mode", ev.mode},
                 {"out", ev.out},       {"stol", ev.tol.stol},
                 {"ltol", ev.tol.ltol},   {"angle_tol", ev.tol.angle_tol},
                 {"fp_threshold", ev.fp_threshold}, {"emit_hist", ev.emit_hist},
                 {"jobs", ev.jobs},     {"force", ev.force}};
      return cmd_evaluate(ev, rc);
    }
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const NumericError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
