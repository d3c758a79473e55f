#pragma once

#include <cstdint>
#include <istream>
#include <string>
#include <string_view>
#include <unordered_set>
#include <utility>
#include <vector>

#include "evscore/detail/text.hpp"
#include "evscore/error.hpp"
#include "evscore/timestamp.hpp"

namespace evscore {

// One parsed event-logger line: timestamp, PV name, previous and new state,
// free-text description. line_no is the 1-based index in the source stream
// (0 when the event was not read from a stream).
struct LogEvent {
  Timestamp timestamp;
  std::string pv;
  std::string prev_state;
  std::string new_state;
  std::string description;
  std::size_t line_no = 0;

  bool operator==(const LogEvent&) const = default;
};

// Parses one logical line (no trailing newline) of the tab-separated wire
// format: timestamp<TAB>pv<TAB>prev<TAB>new<TAB>description. The description
// may be empty but its tab must be present.
inline LogEvent parse_line(std::string_view line, std::size_t line_no = 0) {
  auto fields = detail::split(line, '\t');
  if (fields.size() != 5)
    throw Error(Errc::malformed_line,
                "expected 5 tab-separated fields, got " + std::to_string(fields.size()));
  if (fields[1].empty()) throw Error(Errc::empty_pv, "empty PV name");
  if (fields[2].empty() || fields[3].empty())
    throw Error(Errc::malformed_line, "empty state field");

  LogEvent ev;
  ev.timestamp = parse_timestamp(fields[0]);
  ev.pv = std::string(fields[1]);
  ev.prev_state = std::string(fields[2]);
  ev.new_state = std::string(fields[3]);
  ev.description = std::string(fields[4]);
  ev.line_no = line_no;
  return ev;
}

// Canonical wire form of an event; parse_line(format_event(ev)) == ev for
// descriptions free of tabs and newlines.
inline std::string format_event(const LogEvent& ev) {
  std::string out = format_timestamp(ev.timestamp);
  out += '\t';
  out += ev.pv;
  out += '\t';
  out += ev.prev_state;
  out += '\t';
  out += ev.new_state;
  out += '\t';
  out += ev.description;
  return out;
}

// Curated list of PVs to drop before analysis. Entries containing '*' or '?'
// are glob patterns ('*' = any run of characters, '?' = exactly one);
// everything else matches exactly. Matching is case-sensitive.
struct FilterList {
  std::unordered_set<std::string> exact;
  std::vector<std::string> exact_order;  // file order, deduplicated
  std::vector<std::string> globs;        // file order

  bool empty() const { return exact.empty() && globs.empty(); }
};

// Iterative glob matcher with backtracking over the last '*'.
inline bool glob_match(std::string_view pattern, std::string_view text) {
  std::size_t p = 0, t = 0;
  std::size_t star = std::string_view::npos, mark = 0;
  while (t < text.size()) {
    if (p < pattern.size() && (pattern[p] == '?' || pattern[p] == text[t])) {
      ++p;
      ++t;
    } else if (p < pattern.size() && pattern[p] == '*') {
      star = p++;
      mark = t;
    } else if (star != std::string_view::npos) {
      p = star + 1;
      t = ++mark;
    } else {
      return false;
    }
  }
  while (p < pattern.size() && pattern[p] == '*') ++p;
  return p == pattern.size();
}

// Line-oriented filter file: '#' starts a comment, blank lines are ignored,
// surrounding whitespace is trimmed.
inline FilterList load_filter(std::string_view text) {
  FilterList list;
  for (std::string_view raw : detail::split(text, '\n')) {
    if (auto hash = raw.find('#'); hash != std::string_view::npos) raw = raw.substr(0, hash);
    while (!raw.empty() && (raw.back() == ' ' || raw.back() == '\t' || raw.back() == '\r')) raw.remove_suffix(1);
    while (!raw.empty() && (raw.front() == ' ' || raw.front() == '\t')) raw.remove_prefix(1);
    if (raw.empty()) continue;
    if (raw.find_first_of("*?") != std::string_view::npos) {
      list.globs.emplace_back(raw);
    } else if (list.exact.insert(std::string(raw)).second) {
      list.exact_order.emplace_back(raw);
    }
  }
  return list;
}

inline bool is_filtered(const FilterList& filter, std::string_view pv) {
  if (filter.exact.contains(std::string(pv))) return true;
  for (const std::string& g : filter.globs)
    if (glob_match(g, pv)) return true;
  return false;
}

// One skipped-line report from the streaming parser.
struct Diagnostic {
  std::size_t line_no = 0;
  Errc kind = Errc::malformed_line;
  std::string message;
};

inline std::string format_diagnostic(const Diagnostic& d) {
  return std::to_string(d.line_no) + '\t' + errc_name(d.kind) + '\t' + d.message;
}

// Single-pass streaming stage: parses each line, reports malformed lines via
// on_diagnostic and keeps going, drops filtered PVs, and hands every
// surviving event to on_event in input order. Returns the number of events
// delivered. A stream read error aborts with Errc::stream_io carrying that
// count in its message.
template <class EventFn, class DiagFn>
std::size_t for_each_event(std::istream& in, const FilterList& filter, EventFn&& on_event,
                           DiagFn&& on_diagnostic) {
  std::string line;
  std::size_t line_no = 0;
  std::size_t yielded = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    LogEvent ev;
    try {
      ev = parse_line(line, line_no);
    } catch (const Error& e) {
      on_diagnostic(Diagnostic{line_no, e.code(), e.what()});
      continue;
    }
    if (is_filtered(filter, ev.pv)) continue;
    on_event(std::move(ev));
    ++yielded;
  }
  if (in.bad())
    throw Error(Errc::stream_io, "read failed after " + std::to_string(yielded) + " events");
  return yielded;
}

inline std::vector<LogEvent> read_events(std::istream& in, const FilterList& filter,
                                         std::vector<Diagnostic>* diagnostics = nullptr) {
  std::vector<LogEvent> events;
  for_each_event(
      in, filter, [&](LogEvent ev) { events.push_back(std::move(ev)); },
      [&](const Diagnostic& d) {
        if (diagnostics) diagnostics->push_back(d);
      });
  return events;
}

}  // namespace evscore
