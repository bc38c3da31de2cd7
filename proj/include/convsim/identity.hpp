#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace convsim {

inline constexpr int kCodeDigits = 16;
inline constexpr int kGroupDigits = 3;
inline constexpr int kIndividualDigits = kCodeDigits - kGroupDigits;
inline constexpr std::uint32_t kIndividualSpace = 1u << kIndividualDigits;

// Three group labels, one-hot over the first three code digits.
enum class GroupLabel : std::uint8_t { Purple = 0, Yellow = 1, Cyan = 2 };
inline constexpr int kNumGroups = 3;
inline constexpr std::array<GroupLabel, kNumGroups> kAllGroups = {
    GroupLabel::Purple, GroupLabel::Yellow, GroupLabel::Cyan};

std::string_view color_name(GroupLabel group);
std::optional<GroupLabel> group_from_color(std::string_view color);
// "100", "010" or "001".
std::string_view group_segment_string(GroupLabel group);

// 16 binary digits. Digit 0 is the most significant bit, so the group segment
// is the top three bits.
class IdentityCode {
 public:
  constexpr IdentityCode() = default;
  constexpr explicit IdentityCode(std::uint16_t bits) : bits_(bits) {}

  static IdentityCode from_parts(GroupLabel group, std::uint32_t individual);
  static std::optional<IdentityCode> parse(std::string_view digits);

  constexpr std::uint16_t bits() const { return bits_; }
  int digit(int i) const { return (bits_ >> (kCodeDigits - 1 - i)) & 1; }
  std::uint32_t group_segment() const { return bits_ >> kIndividualDigits; }
  std::uint32_t individual_segment() const {
    return bits_ & (kIndividualSpace - 1);
  }
  // Group encoded by a one-hot segment; nullopt for any other pattern.
  std::optional<GroupLabel> group() const;

  std::string to_string() const;
  // Market network input: each digit as 0.0 / 1.0.
  std::array<double, kCodeDigits> as_input() const;

  friend constexpr auto operator<=>(IdentityCode, IdentityCode) = default;

 private:
  std::uint16_t bits_ = 0;
};

}  // namespace convsim
