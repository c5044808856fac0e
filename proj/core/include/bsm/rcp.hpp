#ifndef BSM_RCP_HPP
#define BSM_RCP_HPP

#include <array>
#include <utility>

#include "bsm/errors.hpp"
#include "bsm/rng.hpp"

namespace bsm {
namespace rcp {

// 6x6 speller keyboard, row-major. Codes 1..6 flash rows top to bottom,
// codes 7..12 flash columns left to right; each sequence of 12 flashes
// covers every row and column exactly once.
inline constexpr int kRows = 6;
inline constexpr int kCols = 6;
inline constexpr int kCodes = 12;
inline constexpr int kChars = 36;
inline constexpr std::array<const char*, kRows> kLayout = {
    "ABCDEF", "GHIJKL", "MNOPQR", "STUVWX", "YZ1234", "56789_"};

using CodeSeq = std::array<int, kCodes>;  // permutation of 1..12
using TypeSeq = std::array<int, kCodes>;  // two 1s, aligned with CodeSeq

// 1-based (row, col) of a character on the keyboard.
std::pair<int, int> grid_lookup(char c);

char cell_at(int row, int col);  // 1-based
int char_index(char c);          // row-major 0..35
char char_at(int index);

// The row code (1..6) and column code (7..12) whose flashes contain c.
std::pair<int, int> target_codes(char c);

void validate_code_seq(const CodeSeq& w);

// Y_j = 1 iff flash j contains the target character.
TypeSeq stimulus_type(const CodeSeq& w, char target);

// Uniform random permutation of 1..12 (Fisher-Yates).
CodeSeq random_sequence(Rng& rng);

}  // namespace rcp
}  // namespace bsm

#endif
