#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

namespace proplab {

// Event labels: 'c' marks a trade that changed the mid-price, 'n' one that
// did not. An event has label n if and only if its return is exactly zero.
enum class Label : std::uint8_t { n = 0, c = 1 };

inline char label_char(Label l) { return l == Label::c ? 'c' : 'n'; }

struct TradeEvent {
    std::int64_t t_ms = 0;   // milliseconds since day start
    int sign = 0;            // +1 buyer-initiated, -1 seller-initiated
    Label label = Label::n;
    double log_mid = 0.0;    // natural log of the pre-trade mid
    double ret = 0.0;        // log_mid(next) - log_mid(this); 0 exactly for n
    double volume = 0.0;     // merged trade size, >= 0
};

struct DaySeries {
    std::string date;        // ISO yyyy-mm-dd
    std::vector<TradeEvent> events;

    std::size_t size() const { return events.size(); }
};

struct InstrumentData {
    std::string instrument_id;
    std::vector<DaySeries> days;
    int max_lag = 0;         // events on the shortest day minus one, capped

    std::size_t total_events() const;
    std::size_t shortest_day() const;
};

struct IngestConfig {
    std::string instrument_id = "unknown";
    double tick = 0.01;              // price grid; mids live on the half-tick grid
    int trim_minutes = 30;           // dropped after open and before close
    std::int64_t session_open_ms = -1;   // -1: use first event of the day
    std::int64_t session_close_ms = -1;  // -1: use last event of the day
    std::int64_t min_day_span_ms = 0;    // spans below this drop the whole day
    int max_lag_cap = 512;
};

struct IngestStats {
    std::size_t records_total = 0;
    std::size_t rejected_malformed = 0;
    std::size_t rejected_irregular = 0;   // flagged rows, non-finite, crossed quotes
    std::size_t rejected_at_mid = 0;
    std::size_t rejected_mixed_ms = 0;    // same-millisecond groups with both signs
    std::size_t merged_records = 0;       // raw records absorbed into merge groups
    std::size_t days_dropped_shortened = 0;
    std::size_t days_dropped_empty = 0;
    std::size_t events_kept = 0;
};

// Raw trade records -> cleaned, labelled per-day event series.
// Expects a delimited header with timestamp_ms, price, bid, ask, volume, flags
// and an optional date column. Same-sign same-millisecond trades are merged,
// trades at the mid are discarded, mixed-sign milliseconds are rejected whole.
InstrumentData parse_trades(std::istream& raw, const IngestConfig& config,
                            IngestStats* stats = nullptr);

// Canonical event CSV: date,t,sign,label,log_mid,ret,volume.
// Writing then re-reading reproduces the data exactly.
void write_canonical(std::ostream& out, const InstrumentData& data);
InstrumentData read_canonical(std::istream& in, int max_lag_cap = 512,
                              bool strict = true);

// Loads either raw or canonical input based on the header line.
InstrumentData load_events(std::istream& in, const IngestConfig& config,
                           IngestStats* stats = nullptr);

// Continuation-to-alternation ratio of nonzero price moves, eta = N_c / (2 N_a).
// Throws if there are fewer than two moves or no alternations.
double compute_eta(const InstrumentData& data);

// Deterministic partition by day index parity: ({d0,d2,...}, {d1,d3,...}).
// Both halves keep the instrument id and recompute max_lag. Throws on one day.
std::pair<InstrumentData, InstrumentData> split_odd_even(const InstrumentData& data);

// Column views over one day, used throughout estimation and simulation.
std::vector<double> signs_of(const DaySeries& day);
std::vector<double> labeled_signs(const DaySeries& day, Label which);
std::vector<double> returns_of(const DaySeries& day);
std::vector<double> labeled_returns(const DaySeries& day, Label which);
std::vector<double> label_indicator(const DaySeries& day, Label which);
std::vector<double> log_mid_path(const DaySeries& day);  // length size()+1, ends at the day's final mid
std::vector<double> signed_volumes(const DaySeries& day);

}  // namespace proplab
