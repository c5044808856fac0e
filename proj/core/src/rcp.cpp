#include "bsm/rcp.hpp"

#include <string>

namespace bsm {
namespace rcp {

std::pair<int, int> grid_lookup(char c) {
  for (int r = 0; r < kRows; ++r)
    for (int col = 0; col < kCols; ++col)
      if (kLayout[r][col] == c) return {r + 1, col + 1};
  throw ValidationError(std::string("grid_lookup: unknown character '") + c +
                        "'");
}

char cell_at(int row, int col) {
  if (row < 1 || row > kRows || col < 1 || col > kCols)
    throw ValidationError("cell_at: position out of range");
  return kLayout[row - 1][col - 1];
}

int char_index(char c) {
  const auto [row, col] = grid_lookup(c);
  return (row - 1) * kCols + (col - 1);
}

char char_at(int index) {
  if (index < 0 || index >= kChars)
    throw ValidationError("char_at: index out of range");
  return kLayout[index / kCols][index % kCols];
}

std::pair<int, int> target_codes(char c) {
  const auto [row, col] = grid_lookup(c);
  return {row, kRows + col};
}

void validate_code_seq(const CodeSeq& w) {
  std::array<bool, kCodes> seen{};
  for (int code : w) {
    if (code < 1 || code > kCodes)
      throw ValidationError("stimulus codes must lie in 1..12");
    if (seen[code - 1])
      throw ValidationError("stimulus codes must form a permutation of 1..12");
    seen[code - 1] = true;
  }
}

TypeSeq stimulus_type(const CodeSeq& w, char target) {
  validate_code_seq(w);
  const auto [row_code, col_code] = target_codes(target);
  TypeSeq y{};
  for (int j = 0; j < kCodes; ++j)
    y[j] = (w[j] == row_code || w[j] == col_code) ? 1 : 0;
  return y;
}

CodeSeq random_sequence(Rng& rng) {
  CodeSeq w;
  for (int j = 0; j < kCodes; ++j) w[j] = j + 1;
  for (int j = kCodes - 1; j > 0; --j)
    std::swap(w[j], w[draw_index(rng, j + 1)]);
  return w;
}

}  // namespace rcp
}  // namespace bsm
