#include "crysgen/text.hpp"

#include <array>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include "crysgen/elements.hpp"
#include "crysgen/errors.hpp"

namespace crysgen {

namespace {

// Half-up rounding at the stated precision, independent of printf's
// round-to-even behaviour.
std::string format_fixed(double x, int decimals) {
  const double scale = std::pow(10.0, decimals);
  const double rounded = std::floor(x * scale + 0.5) / scale;
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, rounded);
  return buf;
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream is(line);
  std::string f;
  while (is >> f) out.push_back(f);
  return out;
}

bool parse_double(const std::string& s, double& out) {
  try {
    std::size_t pos = 0;
    out = std::stod(s, &pos);
    return pos == s.size() && std::isfinite(out);
  } catch (...) {
    return false;
  }
}

std::vector<std::string> split_lines(const std::string& text) {
  std::vector<std::string> lines;
  std::string cur;
  for (char ch : text) {
    if (ch == '\n') {
      lines.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur += ch;
    }
  }
  if (!cur.empty()) lines.push_back(cur);
  while (!lines.empty() && lines.back().empty()) lines.pop_back();
  return lines;
}

const std::string kPromptHead = "Below is a description of a bulk material. ";
const std::string kPromptTail =
    "Generate a description of the lengths and angles of the lattice vectors "
    "and then the element type and coordinates for each atom within the lattice:";

}  // namespace

std::string serialize_crystal(const Crystal& c) {
  for (int z : c.atom_types) {
    if (!is_known_element(z)) {
      throw UnknownElement("atomic number " + std::to_string(z));
    }
  }
  const LatticeParams p = params_from_lattice(c.lattice);
  std::string out;
  out += format_fixed(p.a, 1) + " " + format_fixed(p.b, 1) + " " + format_fixed(p.c, 1) + "\n";
  out += format_fixed(p.alpha, 0) + " " + format_fixed(p.beta, 0) + " " + format_fixed(p.gamma, 0);
  for (int i = 0; i < c.num_atoms(); ++i) {
    out += "\n" + element_symbol(c.atom_types[i]) + "\n";
    out += format_fixed(c.frac_coords(i, 0), 2) + " " + format_fixed(c.frac_coords(i, 1), 2) +
           " " + format_fixed(c.frac_coords(i, 2), 2);
  }
  return out;
}

Crystal parse_crystal_text(const std::string& text) {
  const auto lines = split_lines(text);
  if (lines.size() < 2) throw SyntaxError("expected lengths and angles header lines");

  auto parse_triple = [](const std::string& line, const char* what) {
    const auto fields = split_fields(line);
    if (fields.size() != 3) {
      throw SyntaxError(std::string(what) + " line must have 3 fields");
    }
    std::array<double, 3> vals{};
    for (int i = 0; i < 3; ++i) {
      if (!parse_double(fields[i], vals[i])) {
        throw SyntaxError(std::string("bad numeric field '") + fields[i] + "'");
      }
    }
    return vals;
  };
  const auto lengths = parse_triple(lines[0], "lengths");
  const auto angles = parse_triple(lines[1], "angles");

  if ((lines.size() - 2) % 2 != 0) throw SyntaxError("dangling atom line");
  const std::size_t n = (lines.size() - 2) / 2;
  if (n == 0) throw EmptyStructure("no atom entries");

  Crystal c;
  c.frac_coords.resize(static_cast<Eigen::Index>(n), 3);
  for (std::size_t i = 0; i < n; ++i) {
    const auto sym_fields = split_fields(lines[2 + 2 * i]);
    if (sym_fields.size() != 1) throw SyntaxError("element line must hold a single symbol");
    const int z = atomic_number(sym_fields[0]);
    if (z == 0) throw UnknownElement(sym_fields[0]);
    c.atom_types.push_back(z);
    const auto xyz = parse_triple(lines[3 + 2 * i], "coordinate");
    for (int j = 0; j < 3; ++j) {
      c.frac_coords(static_cast<Eigen::Index>(i), j) = wrap_fractional(xyz[j]);
    }
  }

  try {
    c.lattice = lattice_from_params(
        {lengths[0], lengths[1], lengths[2], angles[0], angles[1], angles[2]});
  } catch (const ValidationError& e) {
    throw DegenerateLattice(e.what());
  }
  return c;
}

// --- tokenizer --------------------------------------------------------------

namespace {

const std::vector<std::string>& pieces() {
  static const std::vector<std::string> v = [] {
    std::vector<std::string> p;
    p.emplace_back("");  // BOS
    p.emplace_back("");  // EOS
    for (int d = 0; d < 10; ++d) p.emplace_back(1, static_cast<char>('0' + d));
    p.emplace_back(".");
    p.emplace_back(" ");
    p.emplace_back("\n");
    for (int z = 1; z <= kMaxAtomicNumber; ++z) p.push_back(element_symbol(z));
    return p;
  }();
  return v;
}

}  // namespace

TokenId Vocab::digit(int d) { return static_cast<TokenId>(2 + d); }
TokenId Vocab::period() { return 12; }
TokenId Vocab::space() { return 13; }
TokenId Vocab::newline() { return 14; }
TokenId Vocab::element(int z) { return static_cast<TokenId>(14 + z); }
std::size_t Vocab::size() { return pieces().size(); }
const std::string& Vocab::piece(TokenId id) { return pieces().at(id); }

TokenSeq tokenize(const std::string& text) {
  TokenSeq out;
  out.push_back(Vocab::kBos);
  std::size_t i = 0;
  while (i < text.size()) {
    const char ch = text[i];
    if (ch >= '0' && ch <= '9') {
      out.push_back(Vocab::digit(ch - '0'));
      ++i;
    } else if (ch == '.') {
      out.push_back(Vocab::period());
      ++i;
    } else if (ch == ' ') {
      out.push_back(Vocab::space());
      ++i;
    } else if (ch == '\n') {
      out.push_back(Vocab::newline());
      ++i;
    } else if (std::isupper(static_cast<unsigned char>(ch))) {
      int z = 0;
      std::size_t len = 1;
      if (i + 1 < text.size() && std::islower(static_cast<unsigned char>(text[i + 1]))) {
        z = atomic_number(text.substr(i, 2));
        if (z != 0) len = 2;
      }
      if (z == 0) z = atomic_number(text.substr(i, 1));
      if (z == 0) throw UnknownToken("at '" + text.substr(i, 2) + "'");
      out.push_back(Vocab::element(z));
      i += len;
    } else {
      throw UnknownToken("character '" + std::string(1, ch) + "'");
    }
  }
  out.push_back(Vocab::kEos);
  return out;
}

std::string detokenize(const TokenSeq& tokens) {
  std::string out;
  for (TokenId id : tokens) {
    if (id >= Vocab::size()) throw UnknownToken("token id " + std::to_string(id));
    out += Vocab::piece(id);
  }
  return out;
}

// --- prompts ----------------------------------------------------------------

Prompt build_prompt_unconditional() {
  Prompt p;
  p.kind = PromptKind::Unconditional;
  p.text = kPromptHead + kPromptTail;
  return p;
}

Prompt build_prompt_composition(const std::string& formula) {
  parse_formula(formula);  // validates
  Prompt p;
  p.kind = PromptKind::Composition;
  p.formula = formula;
  p.text = kPromptHead + "The chemical formula is " + formula + ". " + kPromptTail;
  return p;
}

Prompt build_prompt_space_group(int number) {
  if (number < 1 || number > 230) {
    throw BadSpaceGroup("space group must lie in 1..=230, got " + std::to_string(number));
  }
  Prompt p;
  p.kind = PromptKind::SpaceGroup;
  p.space_group = number;
  p.text = kPromptHead + "The spacegroup number is " + std::to_string(number) + ". " + kPromptTail;
  return p;
}

std::vector<std::pair<int, int>> parse_formula(const std::string& formula) {
  if (formula.empty()) throw BadFormula("empty formula");
  std::vector<std::pair<int, int>> out;
  std::size_t i = 0;
  while (i < formula.size()) {
    if (!std::isupper(static_cast<unsigned char>(formula[i]))) {
      throw BadFormula("expected element symbol at '" + formula.substr(i) + "'");
    }
    std::size_t len = 1;
    if (i + 1 < formula.size() && std::islower(static_cast<unsigned char>(formula[i + 1]))) {
      len = 2;
    }
    int z = atomic_number(formula.substr(i, len));
    if (z == 0 && len == 2) {
      len = 1;
      z = atomic_number(formula.substr(i, 1));
    }
    if (z == 0) throw BadFormula("unknown element in '" + formula + "'");
    i += len;
    int count = 0;
    while (i < formula.size() && std::isdigit(static_cast<unsigned char>(formula[i]))) {
      count = count * 10 + (formula[i] - '0');
      ++i;
    }
    if (count == 0) count = 1;
    out.emplace_back(z, count);
  }
  return out;
}

std::string reduced_formula(const std::vector<int>& atom_types) {
  std::map<std::string, long long> counts;
  for (int z : atom_types) counts[element_symbol(z)] += 1;
  long long g = 0;
  for (const auto& [sym, n] : counts) g = std::gcd(g, n);
  std::string out;
  for (const auto& [sym, n] : counts) {
    out += sym;
    const long long reduced = n / std::max<long long>(g, 1);
    if (reduced > 1) out += std::to_string(reduced);
  }
  return out;
}

// --- corpus files -----------------------------------------------------------

void write_text_corpus(const std::string& path, const std::vector<std::string>& texts) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open text corpus for writing: " + path);
  for (std::size_t i = 0; i < texts.size(); ++i) {
    if (i > 0) out << "\n";
    out << texts[i] << "\n";
  }
  if (!out) throw IoError("failed writing text corpus: " + path);
}

std::vector<std::string> read_text_corpus(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open text corpus: " + path);
  std::vector<std::string> out;
  std::string line, cur;
  bool any = false;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) {
      if (any) out.push_back(cur);
      cur.clear();
      any = false;
    } else {
      if (any) cur += "\n";
      cur += line;
      any = true;
    }
  }
  if (any) out.push_back(cur);
  return out;
}

}  // namespace crysgen
