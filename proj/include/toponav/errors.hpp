#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace toponav {

// Base for everything this library throws on bad input or bad state.
// std::invalid_argument / std::out_of_range are still used for plain
// precondition violations (caller bugs, not data problems).
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed text input. line/col are 1-based positions into the source.
class ParseError : public Error {
 public:
  ParseError(const std::string& msg, int line, int col)
      : Error(msg + " at line " + std::to_string(line) + ", column " +
              std::to_string(col)),
        line(line),
        col(col) {}
  int line;
  int col;
};

// A way references a node id that was never declared.
class DanglingReferenceError : public Error {
 public:
  explicit DanglingReferenceError(std::int64_t id)
      : Error("way references undeclared node " + std::to_string(id)),
        node_id(id) {}
  std::int64_t node_id;
};

// A way with fewer than two node references has no geometry.
class DegenerateWayError : public Error {
 public:
  explicit DegenerateWayError(std::int64_t id)
      : Error("way " + std::to_string(id) + " has fewer than two nodes"),
        way_id(id) {}
  std::int64_t way_id;
};

// Configuration rejected: unknown key, bad type, or out-of-range value.
class ConfigError : public Error {
 public:
  using Error::Error;
};

class NoRouteError : public Error {
 public:
  using Error::Error;
};

// Route edge list is not head-to-tail connected.
class InvalidRouteError : public Error {
 public:
  using Error::Error;
};

// Query pose is too far from the route to project onto it.
class OffRouteError : public Error {
 public:
  using Error::Error;
};

class SimulationDivergedError : public Error {
 public:
  using Error::Error;
};

// Observation / map raster does not match what a model expects.
class ChannelMismatchError : public Error {
 public:
  using Error::Error;
};

// A loss term left the representable range; names the term.
class NumericOverflowError : public Error {
 public:
  explicit NumericOverflowError(const std::string& term)
      : Error("non-finite value in loss term '" + term + "'"), term(term) {}
  std::string term;
};

class TrainingDivergedError : public Error {
 public:
  using Error::Error;
};

// Map matching found no candidate edge for a trace sample.
class NoCandidateError : public Error {
 public:
  explicit NoCandidateError(std::size_t index)
      : Error("no candidate edge within radius for sample " +
              std::to_string(index)),
        sample_index(index) {}
  std::size_t sample_index;
};

// Matched edge sequence has a gap that no single route edge closes.
class BrokenRouteError : public Error {
 public:
  BrokenRouteError(int from_edge, int to_edge)
      : Error("matched edges " + std::to_string(from_edge) + " -> " +
              std::to_string(to_edge) + " are not connected"),
        from_edge(from_edge),
        to_edge(to_edge) {}
  int from_edge;
  int to_edge;
};

// An experiment needs an artifact (checkpoint, trace, ...) that is absent.
class MissingArtifactError : public Error {
 public:
  using Error::Error;
};

}  // namespace toponav
