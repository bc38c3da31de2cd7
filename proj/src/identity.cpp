#include "convsim/identity.hpp"

#include <stdexcept>

namespace convsim {

std::string_view color_name(GroupLabel group) {
  switch (group) {
    case GroupLabel::Purple: return "purple";
    case GroupLabel::Yellow: return "yellow";
    case GroupLabel::Cyan: return "cyan";
  }
  return "unknown";
}

std::optional<GroupLabel> group_from_color(std::string_view color) {
  for (auto g : kAllGroups)
    if (color_name(g) == color) return g;
  return std::nullopt;
}

std::string_view group_segment_string(GroupLabel group) {
  switch (group) {
    case GroupLabel::Purple: return "100";
    case GroupLabel::Yellow: return "010";
    case GroupLabel::Cyan: return "001";
  }
  return "000";
}

IdentityCode IdentityCode::from_parts(GroupLabel group,
                                      std::uint32_t individual) {
  if (individual >= kIndividualSpace)
    throw std::out_of_range("individual segment exceeds 13 bits");
  const std::uint32_t segment = 0b100u >> static_cast<int>(group);
  return IdentityCode(
      static_cast<std::uint16_t>((segment << kIndividualDigits) | individual));
}

std::optional<IdentityCode> IdentityCode::parse(std::string_view digits) {
  if (digits.size() != kCodeDigits) return std::nullopt;
  std::uint16_t bits = 0;
  for (char c : digits) {
    if (c != '0' && c != '1') return std::nullopt;
    bits = static_cast<std::uint16_t>((bits << 1) | (c == '1' ? 1 : 0));
  }
  return IdentityCode(bits);
}

std::optional<GroupLabel> IdentityCode::group() const {
  switch (group_segment()) {
    case 0b100: return GroupLabel::Purple;
    case 0b010: return GroupLabel::Yellow;
    case 0b001: return GroupLabel::Cyan;
    default: return std::nullopt;
  }
}

std::string IdentityCode::to_string() const {
  std::string out(kCodeDigits, '0');
  for (int i = 0; i < kCodeDigits; ++i)
    if (digit(i)) out[i] = '1';
  return out;
}

std::array<double, kCodeDigits> IdentityCode::as_input() const {
  std::array<double, kCodeDigits> x{};
  for (int i = 0; i < kCodeDigits; ++i) x[i] = digit(i);
  return x;
}

}  // namespace convsim
