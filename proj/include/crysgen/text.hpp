#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "crysgen/crystal.hpp"

namespace crysgen {

// Fixed-precision text form of a crystal:
//   line 1: cell lengths, one decimal place, space separated
//   line 2: cell angles, rounded to integers
//   then per atom: element symbol line, then "x y z" at two decimals.
// Rounding is half-up at the stated precision.
std::string serialize_crystal(const Crystal& c);

// Parses the dialect above. Coordinates are wrapped; the lattice is rebuilt
// from lengths/angles. Throws SyntaxError, UnknownElement, DegenerateLattice,
// EmptyStructure.
Crystal parse_crystal_text(const std::string& text);

// --- digit-level tokenizer ------------------------------------------------

using TokenId = std::uint16_t;

// Vocabulary: BOS, EOS, digits 0-9, '.', ' ', newline, then the 100 element
// symbols. Ids are stable by construction.
struct Vocab {
  static constexpr TokenId kBos = 0;
  static constexpr TokenId kEos = 1;
  static TokenId digit(int d);        // '0'..'9'
  static TokenId period();            // '.'
  static TokenId space();             // ' '
  static TokenId newline();           // '\n'
  static TokenId element(int z);      // whitelist symbol
  static std::size_t size();
  // Text fragment for one token; empty for BOS/EOS.
  static const std::string& piece(TokenId id);
};

using TokenSeq = std::vector<TokenId>;

// Wraps content in BOS...EOS; numbers are split into individual digit tokens,
// element symbols stay single tokens. Throws UnknownToken on anything else.
TokenSeq tokenize(const std::string& text);
std::string detokenize(const TokenSeq& tokens);

// --- prompts ---------------------------------------------------------------

enum class PromptKind { Unconditional, Composition, SpaceGroup };

struct Prompt {
  PromptKind kind = PromptKind::Unconditional;
  std::string formula;     // Composition only
  int space_group = 0;     // SpaceGroup only
  std::string text;        // rendered prompt
};

Prompt build_prompt_unconditional();
Prompt build_prompt_composition(const std::string& formula);  // throws BadFormula
Prompt build_prompt_space_group(int number);                  // throws BadSpaceGroup

// Parses a formula like "SrTiO3" into (Z, count) pairs in order of appearance.
// Throws BadFormula on empty/malformed input or unknown symbols.
std::vector<std::pair<int, int>> parse_formula(const std::string& formula);

// Canonical reduced formula: counts divided by their gcd, elements sorted
// alphabetically by symbol, count 1 omitted ("ClNa", "O2Ti").
std::string reduced_formula(const std::vector<int>& atom_types);

// --- corpus files ----------------------------------------------------------

// Text corpus: one serialized crystal per record, blank line separated.
void write_text_corpus(const std::string& path, const std::vector<std::string>& texts);
std::vector<std::string> read_text_corpus(const std::string& path);

}  // namespace crysgen
