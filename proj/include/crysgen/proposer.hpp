#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "crysgen/crystal.hpp"
#include "crysgen/rng.hpp"
#include "crysgen/text.hpp"

namespace crysgen {

// A candidate material emitted by a proposer; the hybrid sampler keeps the
// atom types and refines coordinates and lattice.
struct Proposal {
  std::vector<int> atom_types;
  MatX3 frac_coords;  // wrapped
  Mat3 lattice;
  std::string source;
  Prompt prompt;
  int attempts_used = 1;

  Crystal crystal() const { return Crystal{atom_types, frac_coords, lattice}; }
};

struct ProposalCheck {
  bool accepted = false;
  std::string reason;  // empty when accepted
};

// Total function; never throws.
ProposalCheck validate_proposal(const Proposal& p);

class Proposer {
 public:
  virtual ~Proposer() = default;
  // Deterministic in (trained state, prompt, seed). Throws ExhaustedAttempts
  // when no valid proposal is found within the attempt budget, and
  // UntrainedProposer when called before training/loading.
  virtual Proposal propose(const Prompt& prompt, std::uint64_t seed) const = 0;
  virtual std::string id() const = 0;
};

// --- character/token-level Markov chain proposer -----------------------------

class MarkovProposer : public Proposer {
 public:
  MarkovProposer(int order, int max_attempts = 16, int max_tokens = 4096);

  // Next-token counts over contexts of length `order`. Seen contexts sample
  // from their raw count distribution; unseen contexts fall back to the
  // uniform smoothing limit. Throws EmptyCorpus.
  void train(const std::vector<TokenSeq>& corpus);

  Proposal propose(const Prompt& prompt, std::uint64_t seed) const override;
  std::string id() const override { return "markov"; }

  // Probability of every vocabulary token after `context` (tail is used when
  // longer than the order).
  std::vector<double> next_token_distribution(const TokenSeq& context) const;

  // Generates one token sequence (BOS..EOS). Returns nullopt when the length
  // cap is hit before EOS.
  std::optional<TokenSeq> generate(Rng& rng) const;

  void save(const std::string& path) const;
  static MarkovProposer load(const std::string& path, int max_attempts = 16,
                             int max_tokens = 4096);

  int order() const { return order_; }
  bool trained() const { return trained_; }

 private:
  struct Dist {
    std::vector<TokenId> tokens;
    std::vector<std::uint64_t> cumulative;
    std::uint64_t total = 0;
  };

  std::string context_key(const TokenSeq& seq, std::size_t end) const;
  TokenId sample_next(const std::string& key, Rng& rng) const;

  int order_;
  int max_attempts_;
  int max_tokens_;
  bool trained_ = false;
  std::map<std::string, Dist> table_;
};

// --- pass-through proposer over a crystal record file ------------------------

class FileProposer : public Proposer {
 public:
  explicit FileProposer(std::vector<Crystal> records, std::string source = "file");
  static FileProposer from_record_file(const std::string& path);

  Proposal propose(const Prompt& prompt, std::uint64_t seed) const override;
  std::string id() const override { return source_; }

 private:
  std::vector<Crystal> records_;
  std::string source_;
};

// --- composition-table proposer ----------------------------------------------

// Keyed by reduced formula; composition prompts pick among matching entries,
// other prompts pick uniformly over the whole table.
class TemplateProposer : public Proposer {
 public:
  explicit TemplateProposer(std::vector<Crystal> records);
  static TemplateProposer from_record_file(const std::string& path);

  Proposal propose(const Prompt& prompt, std::uint64_t seed) const override;
  std::string id() const override { return "template"; }

 private:
  std::vector<Crystal> records_;
  std::map<std::string, std::vector<std::size_t>> by_formula_;
};

struct ProposerConfig {
  enum class Kind { Markov, File, Template };
  Kind kind = Kind::Markov;
  int markov_order = 6;
  std::string path;  // markov sidecar or record file
  int max_attempts = 16;
};

std::unique_ptr<Proposer> make_proposer(const ProposerConfig& cfg);

// Tokenizes every serialized crystal and fits the Markov chain.
MarkovProposer train_markov_proposer(const std::vector<Crystal>& dataset, int order,
                                     int max_attempts = 16);

// Reduced formula of a proposal's composition.
std::string composition_of(const Proposal& p);

}  // namespace crysgen
