#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "evscore/detail/text.hpp"
#include "evscore/error.hpp"

namespace evscore {

// The "words" of an event "sentence": non-empty, alphanumeric-only tokens in
// source order (PV tokens first, then description tokens).
using TokenSequence = std::vector<std::string>;

// Embedding tokenizer: concatenates pv and description with a space and
// splits on every maximal run of non-alphanumeric characters. Digits stay
// attached to letters, so "SR07U:GDS1E:BC02" yields SR07U, GDS1E, BC02.
inline TokenSequence tokenize_event(std::string_view pv, std::string_view description) {
  TokenSequence tokens;
  std::string current;
  auto flush = [&] {
    if (!current.empty()) {
      tokens.push_back(current);
      current.clear();
    }
  };
  auto consume = [&](std::string_view text) {
    for (char c : text) {
      if (detail::is_ascii_alnum(c))
        current.push_back(c);
      else
        flush();
    }
    flush();
  };
  consume(pv);
  consume(description);
  if (tokens.empty()) throw Error(Errc::empty_result, "no alphanumeric characters to tokenize");
  return tokens;
}

// Grammar tokenizer: splits on non-alphanumerics and additionally on every
// letter<->digit boundary; with strip_numbers the purely numeric tokens are
// dropped. "SR07U:GDS1E:BC02" yields SR,07,U,GDS,1,E,BC,02.
inline TokenSequence tokenize_grammar(std::string_view pv, bool strip_numbers) {
  TokenSequence tokens;
  std::string current;
  bool current_is_digit = false;
  auto flush = [&] {
    if (current.empty()) return;
    if (!(strip_numbers && current_is_digit)) tokens.push_back(current);
    current.clear();
  };
  for (char c : pv) {
    if (!detail::is_ascii_alnum(c)) {
      flush();
      continue;
    }
    const bool digit = detail::is_ascii_digit(c);
    if (!current.empty() && digit != current_is_digit) flush();
    current_is_digit = digit;
    current.push_back(c);
  }
  flush();
  if (tokens.empty()) throw Error(Errc::empty_result, "no tokens in '" + std::string(pv) + "'");
  return tokens;
}

// Structured decomposition of a PV name following the
// SysSubSys:DeviceID[-SubDevice]:Signal convention. reassemble_channel_name
// reproduces the original name for every successfully parsed PV.
struct ChannelParts {
  std::string sys_subsys;
  std::string device;
  std::optional<std::uint64_t> device_instance;
  std::optional<std::string> sub_device;
  std::string signal;
  bool is_private = false;

  bool operator==(const ChannelParts&) const = default;
};

namespace detail {

inline bool is_forbidden_channel_char(char c) {
  switch (c) {
    case '{': case '}': case '[': case ']': case '.': case '-':
    case '+': case '=': case '~': case '*': case '|': case '<': case '>':
      return true;
    default:
      return false;
  }
}

}  // namespace detail

inline ChannelParts parse_channel_name(std::string_view pv) {
  const std::size_t first = pv.find(':');
  if (first == std::string_view::npos) throw Error(Errc::not_convention, "no colon in '" + std::string(pv) + "'");
  const std::size_t second = pv.find(':', first + 1);
  if (second == std::string_view::npos)
    throw Error(Errc::not_convention, "only one colon in '" + std::string(pv) + "'");

  ChannelParts parts;
  parts.sys_subsys = std::string(pv.substr(0, first));
  std::string_view device_id = pv.substr(first + 1, second - first - 1);
  std::string_view signal = pv.substr(second + 1);  // may itself contain colons

  // '-' is only legal as the single DeviceID/SubDevice separator.
  for (char c : parts.sys_subsys)
    if (detail::is_forbidden_channel_char(c))
      throw Error(Errc::forbidden_character, std::string("'") + c + "' in system name");
  for (char c : signal)
    if (detail::is_forbidden_channel_char(c))
      throw Error(Errc::forbidden_character, std::string("'") + c + "' in signal name");

  std::string_view device_part = device_id;
  if (auto dash = device_id.find('-'); dash != std::string_view::npos) {
    device_part = device_id.substr(0, dash);
    std::string_view sub = device_id.substr(dash + 1);
    if (sub.find('-') != std::string_view::npos)
      throw Error(Errc::forbidden_character, "second '-' in DeviceID segment");
    for (char c : sub)
      if (detail::is_forbidden_channel_char(c))
        throw Error(Errc::forbidden_character, std::string("'") + c + "' in sub-device name");
    parts.sub_device = std::string(sub);
  }
  for (char c : device_part)
    if (detail::is_forbidden_channel_char(c))
      throw Error(Errc::forbidden_character, std::string("'") + c + "' in device name");

  // Device instance = maximal trailing digit run; absent when the segment
  // does not end in a digit ("GDS1E" is a device name with no DI).
  std::size_t digits_start = device_part.size();
  while (digits_start > 0 && detail::is_ascii_digit(device_part[digits_start - 1])) --digits_start;
  if (digits_start < device_part.size()) {
    std::string_view run = device_part.substr(digits_start);
    if (run.size() > 1 && run[0] == '0')
      throw Error(Errc::bad_device_instance, "leading zero in '" + std::string(run) + "'");
    if (run.size() > 19)
      throw Error(Errc::bad_device_instance, "device instance out of range");
    std::uint64_t di = 0;
    for (char c : run) di = di * 10 + static_cast<std::uint64_t>(c - '0');
    parts.device_instance = di;
  }
  parts.device = std::string(device_part.substr(0, digits_start));

  if (!signal.empty() && signal.back() == '_') {
    parts.is_private = true;
    signal.remove_suffix(1);
  }
  parts.signal = std::string(signal);
  return parts;
}

inline std::string reassemble_channel_name(const ChannelParts& parts) {
  std::string out = parts.sys_subsys;
  out += ':';
  out += parts.device;
  if (parts.device_instance) out += std::to_string(*parts.device_instance);
  if (parts.sub_device) {
    out += '-';
    out += *parts.sub_device;
  }
  out += ':';
  out += parts.signal;
  if (parts.is_private) out += '_';
  return out;
}

// Token-flow graph over grammar-tokenized PV names: each name contributes a
// root-to-leaf path, nodes are (token, depth) pairs, and counts are exact
// occurrence counts. For every node at depth > 0 the incoming edge counts
// sum to the node count.
struct TokenFlowGraph {
  struct NodeKey {
    int depth = 0;
    std::string token;
    auto operator<=>(const NodeKey&) const = default;
  };
  // edge key: (source depth, source token, target token); target depth is depth+1
  using EdgeKey = std::tuple<int, std::string, std::string>;

  std::map<NodeKey, std::uint64_t> nodes;
  std::map<EdgeKey, std::uint64_t> edges;
  std::uint64_t skipped = 0;  // names with no tokens at all
};

template <class PvRange>
TokenFlowGraph build_flow_graph(const PvRange& pvs, bool strip_numbers) {
  TokenFlowGraph graph;
  for (const auto& pv : pvs) {
    TokenSequence path;
    try {
      path = tokenize_grammar(pv, strip_numbers);
    } catch (const Error&) {
      ++graph.skipped;
      continue;
    }
    for (std::size_t i = 0; i < path.size(); ++i) {
      ++graph.nodes[{static_cast<int>(i), path[i]}];
      if (i + 1 < path.size()) ++graph.edges[{static_cast<int>(i), path[i], path[i + 1]}];
    }
  }
  return graph;
}

// Deterministic JSON export: nodes sorted by (depth, token) with ids assigned
// in that order, links sorted by (source_id, target_id). Byte-stable across
// runs for the same graph.
inline std::string export_sankey(const TokenFlowGraph& graph) {
  nlohmann::ordered_json doc;
  doc["nodes"] = nlohmann::ordered_json::array();
  doc["links"] = nlohmann::ordered_json::array();

  std::map<TokenFlowGraph::NodeKey, std::size_t> ids;
  for (const auto& [key, count] : graph.nodes) {
    const std::size_t id = ids.size();
    ids.emplace(key, id);
    doc["nodes"].push_back({{"id", id}, {"token", key.token}, {"depth", key.depth}, {"count", count}});
  }
  std::vector<std::tuple<std::size_t, std::size_t, std::uint64_t>> links;
  links.reserve(graph.edges.size());
  for (const auto& [key, count] : graph.edges) {
    const auto& [depth, src, dst] = key;
    links.emplace_back(ids.at({depth, src}), ids.at({depth + 1, dst}), count);
  }
  std::sort(links.begin(), links.end());
  for (const auto& [src_id, dst_id, count] : links)
    doc["links"].push_back({{"source_id", src_id}, {"target_id", dst_id}, {"count", count}});
  return doc.dump();
}

}  // namespace evscore
