#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <map>

#include "crysgen/errors.hpp"
#include "crysgen/elements.hpp"
#include "crysgen/proposer.hpp"
#include "crysgen/records.hpp"

#include "support.hpp"

using namespace crysgen;

TEST_CASE("validate_proposal cases") {
  const Crystal nacl = testsupport::rocksalt_nacl();
  Proposal good{nacl.atom_types, nacl.frac_coords, nacl.lattice, "test", {}, 1};
  CHECK(validate_proposal(good).accepted);

  Proposal flat = good;
  flat.lattice = Mat3::Zero();
  CHECK(validate_proposal(flat).reason == "DegenerateLattice");

  Proposal weird = good;
  weird.atom_types[0] = 120;
  CHECK(validate_proposal(weird).reason == "UnknownElement");

  Proposal empty;
  CHECK(validate_proposal(empty).reason == "EmptyStructure");

  Proposal nan_coords = good;
  nan_coords.frac_coords(0, 0) = std::nan("");
  CHECK(!validate_proposal(nan_coords).accepted);
}

TEST_CASE("file proposer: single-record pass-through and determinism") {
  const std::string path =
      (std::filesystem::temp_directory_path() / "crysgen_file_prop.jsonl").string();
  const Crystal nacl = testsupport::rocksalt_nacl();
  write_record_file(path, {nacl});
  const FileProposer fp = FileProposer::from_record_file(path);

  const Proposal p = fp.propose(build_prompt_unconditional(), 1234);
  CHECK(p.atom_types == nacl.atom_types);
  CHECK(p.lattice == nacl.lattice);
  CHECK(p.frac_coords == nacl.frac_coords);

  const Proposal q = fp.propose(build_prompt_unconditional(), 1234);
  CHECK(q.frac_coords == p.frac_coords);
  std::filesystem::remove(path);
}

TEST_CASE("template proposer honors composition prompts when the table has a hit") {
  Crystal nacl = testsupport::rocksalt_nacl();
  Crystal mgo = nacl;
  mgo.atom_types = {12, 8};
  const TemplateProposer tp({nacl, mgo});
  const Proposal p = tp.propose(build_prompt_composition("NaCl"), 7);
  CHECK(composition_of(p) == "ClNa");
  const Proposal q = tp.propose(build_prompt_composition("MgO"), 7);
  CHECK(composition_of(q) == "MgO");
}

TEST_CASE("markov: degenerate single-sequence memorization with full-length context") {
  const Crystal nacl = testsupport::rocksalt_nacl();
  const std::string text = serialize_crystal(nacl);
  const TokenSeq seq = tokenize(text);
  MarkovProposer mp(static_cast<int>(seq.size()), 4);
  mp.train({seq});
  Rng rng(99);
  for (int i = 0; i < 20; ++i) {
    const auto gen = mp.generate(rng);
    REQUIRE(gen.has_value());
    CHECK(*gen == seq);
  }
}

TEST_CASE("markov: unseen context falls back to the uniform smoothing limit") {
  MarkovProposer mp(3, 4);
  mp.train({tokenize("1.0 1.0 1.0\n90 90 90\nNa\n0.00 0.00 0.00")});
  const TokenSeq ctx = {Vocab::element(30), Vocab::element(30), Vocab::element(30)};
  const auto probs = mp.next_token_distribution(ctx);
  for (double p : probs) CHECK(p == doctest::Approx(1.0 / Vocab::size()));
}

TEST_CASE("markov: seen context uses raw count frequencies") {
  // Order-1 chain: after '.', the corpus continues with 0 twice and 5 once.
  MarkovProposer mp(1, 4);
  mp.train({tokenize("1.0"), tokenize("2.0"), tokenize("3.5")});
  const auto probs = mp.next_token_distribution({Vocab::period()});
  CHECK(probs[Vocab::digit(0)] == doctest::Approx(2.0 / 3.0));
  CHECK(probs[Vocab::digit(5)] == doctest::Approx(1.0 / 3.0));
  CHECK(probs[Vocab::digit(7)] == 0.0);
}

TEST_CASE("markov: unigram frequencies track the corpus within 2% over 1e5 draws") {
  // Order-1 sampling visits the chain's stationary mix of seen contexts.
  std::vector<Crystal> corpus;
  Rng crng(5);
  for (int i = 0; i < 20; ++i) corpus.push_back(testsupport::random_crystal(crng, 4, 20));

  std::vector<TokenSeq> seqs;
  std::map<TokenId, double> corpus_counts;
  double corpus_total = 0;
  for (const auto& c : corpus) {
    const TokenSeq seq = tokenize(serialize_crystal(c));
    seqs.push_back(seq);
    for (std::size_t i = 1; i + 1 < seq.size(); ++i) {
      corpus_counts[seq[i]] += 1;
      corpus_total += 1;
    }
  }
  MarkovProposer mp(2, 4);
  mp.train(seqs);

  Rng rng(123);
  std::map<TokenId, double> sample_counts;
  double sample_total = 0;
  while (sample_total < 1e5) {
    const auto gen = mp.generate(rng);
    REQUIRE(gen.has_value());
    for (std::size_t i = 1; i + 1 < gen->size(); ++i) {
      sample_counts[(*gen)[i]] += 1;
      sample_total += 1;
    }
  }
  for (const auto& [tok, cnt] : corpus_counts) {
    const double expect = cnt / corpus_total;
    const double got = sample_counts[tok] / sample_total;
    CHECK(std::abs(expect - got) < 0.02);
  }
}

TEST_CASE("markov proposer emits only whitelist elements across 1000 samples") {
  std::vector<Crystal> corpus;
  Rng crng(7);
  for (int i = 0; i < 3; ++i) corpus.push_back(testsupport::random_crystal(crng, 3, 30));
  const MarkovProposer mp = train_markov_proposer(corpus, 6, 64);

  const Prompt prompt = build_prompt_unconditional();
  int produced = 0;
  for (int i = 0; i < 1000; ++i) {
    try {
      const Proposal p = mp.propose(prompt, static_cast<std::uint64_t>(i));
      ++produced;
      for (int z : p.atom_types) CHECK(is_known_element(z));
      CHECK(validate_proposal(p).accepted);
    } catch (const ExhaustedAttempts&) {
      // Counted as a discarded batch entry; whitelist still never violated.
    }
  }
  CHECK(produced > 0);
}

TEST_CASE("markov propose: deterministic in seed, exhausts on untrainable corpus") {
  std::vector<Crystal> corpus;
  Rng crng(11);
  for (int i = 0; i < 10; ++i) corpus.push_back(testsupport::random_crystal(crng, 3, 20));
  const MarkovProposer mp = train_markov_proposer(corpus, 8, 32);
  const Prompt prompt = build_prompt_unconditional();
  const Proposal a = mp.propose(prompt, 42);
  const Proposal b = mp.propose(prompt, 42);
  CHECK(a.atom_types == b.atom_types);
  CHECK(a.frac_coords == b.frac_coords);
  CHECK(a.lattice == b.lattice);
  CHECK(a.attempts_used == b.attempts_used);

  MarkovProposer untrained(3, 2);
  CHECK_THROWS_AS(untrained.propose(prompt, 1), UntrainedProposer);
  CHECK_THROWS_AS(untrained.train({}), EmptyCorpus);
}

TEST_CASE("markov sidecar round trip preserves sampling behaviour") {
  std::vector<Crystal> corpus;
  Rng crng(13);
  for (int i = 0; i < 5; ++i) corpus.push_back(testsupport::random_crystal(crng, 4, 25));
  const MarkovProposer mp = train_markov_proposer(corpus, 4, 64);
  const std::string path =
      (std::filesystem::temp_directory_path() / "crysgen_markov_sidecar.bin").string();
  mp.save(path);
  const MarkovProposer loaded = MarkovProposer::load(path, 64);
  CHECK(loaded.order() == 4);

  // Loaded chains must behave identically, successes and failures alike.
  const Prompt prompt = build_prompt_unconditional();
  int successes = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Proposal a, b;
    bool ok_a = true, ok_b = true;
    try {
      a = mp.propose(prompt, seed);
    } catch (const ExhaustedAttempts&) {
      ok_a = false;
    }
    try {
      b = loaded.propose(prompt, seed);
    } catch (const ExhaustedAttempts&) {
      ok_b = false;
    }
    REQUIRE(ok_a == ok_b);
    if (ok_a) {
      ++successes;
      CHECK(a.atom_types == b.atom_types);
      CHECK(a.frac_coords == b.frac_coords);
    }
  }
  CHECK(successes > 0);
  std::filesystem::remove(path);
}

TEST_CASE("composition_of reduces and alphabetizes") {
  Proposal p;
  p.atom_types = {11, 17};
  CHECK(composition_of(p) == "ClNa");
  p.atom_types = {8, 8, 22};
  CHECK(composition_of(p) == "O2Ti");
  p.atom_types = {14, 14, 8, 8, 8, 8};
  CHECK(composition_of(p) == "O2Si");
}

TEST_CASE("accepted proposals re-serialize and re-parse cleanly") {
  std::vector<Crystal> corpus;
  Rng crng(17);
  for (int i = 0; i < 10; ++i) corpus.push_back(testsupport::random_crystal(crng, 4, 30));
  const MarkovProposer mp = train_markov_proposer(corpus, 6, 64);
  const Prompt prompt = build_prompt_unconditional();
  int checked = 0;
  for (std::uint64_t seed = 0; seed < 50 && checked < 20; ++seed) {
    try {
      const Proposal p = mp.propose(prompt, seed);
      const Crystal back = parse_crystal_text(serialize_crystal(p.crystal()));
      CHECK(back.atom_types == p.atom_types);
      ++checked;
    } catch (const ExhaustedAttempts&) {
    }
  }
  CHECK(checked > 0);
}
