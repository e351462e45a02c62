#include "crysgen/proposer.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>

#include "crysgen/elements.hpp"
#include "crysgen/errors.hpp"
#include "crysgen/records.hpp"

namespace crysgen {

ProposalCheck validate_proposal(const Proposal& p) {
  if (p.atom_types.empty()) return {false, "EmptyStructure"};
  if (p.frac_coords.rows() != static_cast<Eigen::Index>(p.atom_types.size())) {
    return {false, "ShapeMismatch"};
  }
  for (int z : p.atom_types) {
    if (!is_known_element(z)) return {false, "UnknownElement"};
  }
  if (!p.frac_coords.allFinite()) return {false, "NonFiniteCoordinates"};
  if (!p.lattice.allFinite() || !(p.lattice.determinant() > 0.0)) {
    return {false, "DegenerateLattice"};
  }
  return {true, ""};
}

// --- MarkovProposer ----------------------------------------------------------

MarkovProposer::MarkovProposer(int order, int max_attempts, int max_tokens)
    : order_(order), max_attempts_(max_attempts), max_tokens_(max_tokens) {
  if (order < 1) throw ValidationError("markov order must be >= 1");
  if (max_attempts < 1) throw ValidationError("max_attempts must be >= 1");
}

std::string MarkovProposer::context_key(const TokenSeq& seq, std::size_t end) const {
  // Key is the `order_` tokens before position `end`, BOS-padded on the left.
  std::string key(static_cast<std::size_t>(order_), static_cast<char>(Vocab::kBos));
  for (int k = 0; k < order_; ++k) {
    const std::ptrdiff_t idx = static_cast<std::ptrdiff_t>(end) - order_ + k;
    if (idx >= 0) key[static_cast<std::size_t>(k)] = static_cast<char>(seq[idx]);
  }
  return key;
}

void MarkovProposer::train(const std::vector<TokenSeq>& corpus) {
  if (corpus.empty()) throw EmptyCorpus("markov training corpus is empty");
  std::map<std::string, std::map<TokenId, std::uint64_t>> counts;
  for (const auto& seq : corpus) {
    for (std::size_t pos = 1; pos < seq.size(); ++pos) {
      counts[context_key(seq, pos)][seq[pos]] += 1;
    }
  }
  table_.clear();
  for (auto& [key, next] : counts) {
    Dist d;
    std::uint64_t running = 0;
    for (const auto& [tok, cnt] : next) {
      running += cnt;
      d.tokens.push_back(tok);
      d.cumulative.push_back(running);
    }
    d.total = running;
    table_.emplace(key, std::move(d));
  }
  trained_ = true;
}

std::vector<double> MarkovProposer::next_token_distribution(const TokenSeq& context) const {
  if (!trained_) throw UntrainedProposer("markov chain has no counts");
  std::vector<double> probs(Vocab::size(), 0.0);
  const auto it = table_.find(context_key(context, context.size()));
  if (it == table_.end()) {
    std::fill(probs.begin(), probs.end(), 1.0 / static_cast<double>(Vocab::size()));
    return probs;
  }
  const Dist& d = it->second;
  std::uint64_t prev = 0;
  for (std::size_t i = 0; i < d.tokens.size(); ++i) {
    probs[d.tokens[i]] = static_cast<double>(d.cumulative[i] - prev) / static_cast<double>(d.total);
    prev = d.cumulative[i];
  }
  return probs;
}

TokenId MarkovProposer::sample_next(const std::string& key, Rng& rng) const {
  const auto it = table_.find(key);
  if (it == table_.end()) {
    return static_cast<TokenId>(rng.uniform_int(Vocab::size()));
  }
  const Dist& d = it->second;
  const auto target = static_cast<std::uint64_t>(rng.uniform01() * static_cast<double>(d.total));
  const auto pos = std::upper_bound(d.cumulative.begin(), d.cumulative.end(), target);
  const std::size_t idx = std::min<std::size_t>(
      static_cast<std::size_t>(pos - d.cumulative.begin()), d.tokens.size() - 1);
  return d.tokens[idx];
}

std::optional<TokenSeq> MarkovProposer::generate(Rng& rng) const {
  if (!trained_) throw UntrainedProposer("markov chain has no counts");
  TokenSeq seq{Vocab::kBos};
  while (static_cast<int>(seq.size()) < max_tokens_) {
    const TokenId tok = sample_next(context_key(seq, seq.size()), rng);
    seq.push_back(tok);
    if (tok == Vocab::kEos) return seq;
  }
  return std::nullopt;
}

Proposal MarkovProposer::propose(const Prompt& prompt, std::uint64_t seed) const {
  if (!trained_) throw UntrainedProposer("markov chain has no counts");
  for (int attempt = 0; attempt < max_attempts_; ++attempt) {
    Rng rng(mix_seed(seed, static_cast<std::uint64_t>(attempt)));
    const auto seq = generate(rng);
    if (!seq) continue;
    Crystal c;
    try {
      c = parse_crystal_text(detokenize(*seq));
    } catch (const ValidationError&) {
      continue;  // hallucinated element, bad layout, degenerate cell: discard
    }
    Proposal p{c.atom_types, c.frac_coords, c.lattice, id(), prompt, attempt + 1};
    if (validate_proposal(p).accepted) return p;
  }
  throw ExhaustedAttempts("no valid markov proposal within " +
                          std::to_string(max_attempts_) + " attempts");
}

namespace {
constexpr char kMarkovMagic[8] = {'C', 'G', 'M', 'K', 'V', '0', '0', '1'};

template <typename T>
void put(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}
template <typename T>
T get(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  return v;
}
}  // namespace

void MarkovProposer::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open markov sidecar for writing: " + path);
  out.write(kMarkovMagic, sizeof kMarkovMagic);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(order_));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(Vocab::size()));
  put<std::uint64_t>(out, table_.size());
  for (const auto& [key, d] : table_) {
    out.write(key.data(), static_cast<std::streamsize>(key.size()));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(d.tokens.size()));
    std::uint64_t prev = 0;
    for (std::size_t i = 0; i < d.tokens.size(); ++i) {
      put<std::uint16_t>(out, d.tokens[i]);
      put<std::uint64_t>(out, d.cumulative[i] - prev);
      prev = d.cumulative[i];
    }
  }
  if (!out) throw IoError("failed writing markov sidecar: " + path);
}

MarkovProposer MarkovProposer::load(const std::string& path, int max_attempts, int max_tokens) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open markov sidecar: " + path);
  char magic[8];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kMarkovMagic, sizeof magic) != 0) {
    throw IoError("not a markov sidecar file: " + path);
  }
  const auto order = get<std::uint32_t>(in);
  const auto vocab = get<std::uint32_t>(in);
  if (vocab != Vocab::size()) throw IoError("markov sidecar vocabulary mismatch");
  MarkovProposer mp(static_cast<int>(order), max_attempts, max_tokens);
  const auto n_ctx = get<std::uint64_t>(in);
  for (std::uint64_t i = 0; i < n_ctx; ++i) {
    std::string key(order, '\0');
    in.read(key.data(), order);
    const auto n_entries = get<std::uint32_t>(in);
    Dist d;
    std::uint64_t running = 0;
    for (std::uint32_t e = 0; e < n_entries; ++e) {
      const auto tok = get<std::uint16_t>(in);
      running += get<std::uint64_t>(in);
      d.tokens.push_back(tok);
      d.cumulative.push_back(running);
    }
    d.total = running;
    mp.table_.emplace(std::move(key), std::move(d));
  }
  if (!in) throw IoError("truncated markov sidecar: " + path);
  mp.trained_ = true;
  return mp;
}

// --- FileProposer ------------------------------------------------------------

FileProposer::FileProposer(std::vector<Crystal> records, std::string source)
    : records_(std::move(records)), source_(std::move(source)) {
  if (records_.empty()) throw EmptyCorpus("file proposer needs at least one record");
}

FileProposer FileProposer::from_record_file(const std::string& path) {
  return FileProposer(read_record_file(path), "file:" + path);
}

Proposal FileProposer::propose(const Prompt& prompt, std::uint64_t seed) const {
  Rng rng(seed);
  const auto& c = records_[rng.uniform_int(records_.size())];
  Proposal p{c.atom_types, wrap_fractional(c.frac_coords), c.lattice, id(), prompt, 1};
  const auto check = validate_proposal(p);
  if (!check.accepted) throw ExhaustedAttempts("stored record rejected: " + check.reason);
  return p;
}

// --- TemplateProposer ---------------------------------------------------------

TemplateProposer::TemplateProposer(std::vector<Crystal> records)
    : records_(std::move(records)) {
  if (records_.empty()) throw EmptyCorpus("template proposer needs at least one record");
  for (std::size_t i = 0; i < records_.size(); ++i) {
    by_formula_[reduced_formula(records_[i].atom_types)].push_back(i);
  }
}

TemplateProposer TemplateProposer::from_record_file(const std::string& path) {
  return TemplateProposer(read_record_file(path));
}

Proposal TemplateProposer::propose(const Prompt& prompt, std::uint64_t seed) const {
  Rng rng(seed);
  std::size_t idx = 0;
  if (prompt.kind == PromptKind::Composition) {
    const auto parsed = parse_formula(prompt.formula);
    std::vector<int> types;
    for (const auto& [z, n] : parsed) types.insert(types.end(), n, z);
    const auto it = by_formula_.find(reduced_formula(types));
    if (it != by_formula_.end()) {
      idx = it->second[rng.uniform_int(it->second.size())];
    } else {
      idx = rng.uniform_int(records_.size());
    }
  } else {
    idx = rng.uniform_int(records_.size());
  }
  const auto& c = records_[idx];
  Proposal p{c.atom_types, wrap_fractional(c.frac_coords), c.lattice, id(), prompt, 1};
  const auto check = validate_proposal(p);
  if (!check.accepted) throw ExhaustedAttempts("stored record rejected: " + check.reason);
  return p;
}

// --- factory helpers ----------------------------------------------------------

std::unique_ptr<Proposer> make_proposer(const ProposerConfig& cfg) {
  switch (cfg.kind) {
    case ProposerConfig::Kind::Markov:
      return std::make_unique<MarkovProposer>(
          MarkovProposer::load(cfg.path, cfg.max_attempts));
    case ProposerConfig::Kind::File:
      return std::make_unique<FileProposer>(FileProposer::from_record_file(cfg.path));
    case ProposerConfig::Kind::Template:
      return std::make_unique<TemplateProposer>(TemplateProposer::from_record_file(cfg.path));
  }
  throw ValidationError("unknown proposer kind");
}

MarkovProposer train_markov_proposer(const std::vector<Crystal>& dataset, int order,
                                     int max_attempts) {
  std::vector<TokenSeq> corpus;
  corpus.reserve(dataset.size());
  for (const auto& c : dataset) corpus.push_back(tokenize(serialize_crystal(c)));
  MarkovProposer mp(order, max_attempts);
  mp.train(corpus);
  return mp;
}

std::string composition_of(const Proposal& p) { return reduced_formula(p.atom_types); }

}  // namespace crysgen
