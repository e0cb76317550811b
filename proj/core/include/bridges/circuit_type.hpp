#pragma once

#include <cstdint>
#include <optional>
#include <string>

namespace bridges {

/// The 8 functional categories, stable codes 0..7 in listed order.
enum class CircuitType : std::uint8_t {
  EncryptionUnits = 0,
  DataPathUnits = 1,
  ControlLogicUnits = 2,
  ArithmeticUnits = 3,
  CommunicationProtocolUnits = 4,
  SignalProcessingUnits = 5,
  ClockManagementUnits = 6,
  OtherUnits = 7,
};

inline constexpr int kCircuitTypeCount = 8;

const char* to_string(CircuitType t);
std::optional<CircuitType> circuit_type_from_string(const std::string& s);

}  // namespace bridges
