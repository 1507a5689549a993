#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "kexp/linops.hpp"

namespace kexp {

namespace {

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return s;
}

enum class Field { real, complex, integer };
enum class Symmetry { general, symmetric, skew_symmetric, hermitian };

bool is_blank(std::string_view line) {
  return std::all_of(line.begin(), line.end(),
                     [](unsigned char c) { return std::isspace(c); });
}

}  // namespace

SparseMatrixCSR parse_matrix_market(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  long lineno = 0;

  if (!std::getline(in, line)) throw ParseError("empty Matrix Market input", 1);
  ++lineno;
  std::istringstream header(line);
  std::string banner, object, format, field_s, symmetry_s;
  header >> banner >> object >> format >> field_s >> symmetry_s;
  if (banner != "%%MatrixMarket")
    throw ParseError("missing %%MatrixMarket banner", lineno);
  if (lower(object) != "matrix")
    throw ParseError("unsupported object '" + object + "'", lineno);
  if (lower(format) != "coordinate")
    throw ParseError("only coordinate format is supported", lineno);

  Field field;
  const std::string f = lower(field_s);
  if (f == "real" || f == "double")
    field = Field::real;
  else if (f == "complex")
    field = Field::complex;
  else if (f == "integer")
    field = Field::integer;
  else
    throw ParseError("unsupported field type '" + field_s + "'", lineno);

  Symmetry sym;
  const std::string sy = lower(symmetry_s);
  if (sy == "general")
    sym = Symmetry::general;
  else if (sy == "symmetric")
    sym = Symmetry::symmetric;
  else if (sy == "skew-symmetric")
    sym = Symmetry::skew_symmetric;
  else if (sy == "hermitian")
    sym = Symmetry::hermitian;
  else
    throw ParseError("unsupported symmetry '" + symmetry_s + "'", lineno);
  if (sym == Symmetry::hermitian && field != Field::complex)
    throw ParseError("hermitian symmetry requires complex field", lineno);

  // size line, skipping comments
  long rows = -1, cols = -1, nnz = -1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '%' || is_blank(line)) continue;
    std::istringstream sz(line);
    if (!(sz >> rows >> cols >> nnz) || rows < 0 || cols < 0 || nnz < 0)
      throw ParseError("malformed size line", lineno);
    break;
  }
  if (rows < 0) throw ParseError("missing size line", lineno);
  if (rows != cols) throw ParseError("matrix must be square", lineno);

  std::vector<SparseMatrixCSR::Entry> entries;
  entries.reserve(static_cast<std::size_t>(nnz) *
                  (sym == Symmetry::general ? 1 : 2));
  long read = 0;
  while (read < nnz && std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '%' || is_blank(line)) continue;
    std::istringstream es(line);
    long i = 0, j = 0;
    double re = 0.0, im = 0.0;
    if (!(es >> i >> j)) throw ParseError("malformed entry", lineno);
    if (!(es >> re)) throw ParseError("missing value", lineno);
    if (field == Field::complex && !(es >> im))
      throw ParseError("missing imaginary part", lineno);
    if (i < 1 || i > rows || j < 1 || j > cols)
      throw ParseError("entry index out of range", lineno);
    const Complex v(re, im);
    entries.push_back({i - 1, j - 1, v});
    if (i != j) {
      switch (sym) {
        case Symmetry::general:
          break;
        case Symmetry::symmetric:
          entries.push_back({j - 1, i - 1, v});
          break;
        case Symmetry::skew_symmetric:
          entries.push_back({j - 1, i - 1, -v});
          break;
        case Symmetry::hermitian:
          entries.push_back({j - 1, i - 1, std::conj(v)});
          break;
      }
    } else if (sym == Symmetry::skew_symmetric && v != Complex{}) {
      throw ParseError("nonzero diagonal in skew-symmetric matrix", lineno);
    }
    ++read;
  }
  if (read < nnz)
    throw ParseError("expected " + std::to_string(nnz) + " entries, found " +
                         std::to_string(read),
                     lineno);
  auto csr = SparseMatrixCSR::from_entries(rows, std::move(entries));
  csr.validate();
  return csr;
}

SparseMatrixCSR load_matrix_market(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw InvalidArgument("cannot open Matrix Market file: " + path);
  std::stringstream buffer;
  buffer << f.rdbuf();
  return parse_matrix_market(buffer.str());
}

void save_matrix_market(const SparseMatrixCSR& a, const std::string& path) {
  a.validate();
  std::FILE* f = std::fopen(path.c_str(), "w");
  if (!f) throw InvalidArgument("cannot write Matrix Market file: " + path);
  std::fprintf(f, "%%%%MatrixMarket matrix coordinate complex general\n");
  std::fprintf(f, "%ld %ld %ld\n", static_cast<long>(a.n),
               static_cast<long>(a.n), static_cast<long>(a.nnz()));
  for (Index i = 0; i < a.n; ++i)
    for (Index k = a.row_offsets[i]; k < a.row_offsets[i + 1]; ++k)
      std::fprintf(f, "%ld %ld %.17g %.17g\n", static_cast<long>(i + 1),
                   static_cast<long>(a.col_indices[k] + 1), a.values[k].real(),
                   a.values[k].imag());
  std::fclose(f);
}

}  // namespace kexp
