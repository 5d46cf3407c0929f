#include "proplab/events.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <iostream>
#include <istream>
#include <iterator>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace proplab {

std::size_t InstrumentData::total_events() const {
    std::size_t n = 0;
    for (const auto& d : days) n += d.events.size();
    return n;
}

std::size_t InstrumentData::shortest_day() const {
    std::size_t n = std::numeric_limits<std::size_t>::max();
    for (const auto& d : days) n = std::min(n, d.events.size());
    return days.empty() ? 0 : n;
}

namespace {

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
        const std::size_t pos = line.find(',', start);
        if (pos == std::string::npos) {
            fields.push_back(line.substr(start));
            break;
        }
        fields.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
    if (!fields.empty() && !fields.back().empty() && fields.back().back() == '\r')
        fields.back().pop_back();
    return fields;
}

bool parse_double_strict(const std::string& s, double& out) {
    if (s.empty()) return false;
    char* end = nullptr;
    out = std::strtod(s.c_str(), &end);
    return end == s.c_str() + s.size() && std::isfinite(out);
}

bool parse_int64_strict(const std::string& s, std::int64_t& out) {
    if (s.empty()) return false;
    char* end = nullptr;
    out = std::strtoll(s.c_str(), &end, 10);
    return end == s.c_str() + s.size();
}

struct RawRecord {
    std::int64_t ts = 0;
    std::int64_t mid2 = 0;  // mid in half-tick units, exact on the price grid
    int sign = 0;
    double volume = 0.0;
};

void append_event_day(InstrumentData& data, const std::string& date,
                      std::vector<RawRecord> recs, const IngestConfig& config,
                      IngestStats& stats) {
    if (recs.empty()) return;
    std::stable_sort(recs.begin(), recs.end(),
                     [](const RawRecord& a, const RawRecord& b) { return a.ts < b.ts; });

    if (config.min_day_span_ms > 0 &&
        recs.back().ts - recs.front().ts < config.min_day_span_ms) {
        ++stats.days_dropped_shortened;
        return;
    }

    // Merge same-millisecond runs. A run with both signs present is ambiguous
    // (no intra-millisecond ordering) and is rejected whole.
    std::vector<RawRecord> merged;
    merged.reserve(recs.size());
    for (std::size_t i = 0; i < recs.size();) {
        std::size_t j = i + 1;
        bool mixed = false;
        double vol = recs[i].volume;
        while (j < recs.size() && recs[j].ts == recs[i].ts) {
            if (recs[j].sign != recs[i].sign) mixed = true;
            vol += recs[j].volume;
            ++j;
        }
        if (mixed) {
            stats.rejected_mixed_ms += j - i;
        } else {
            RawRecord r = recs[i];
            r.volume = vol;
            stats.merged_records += j - i - 1;
            merged.push_back(r);
        }
        i = j;
    }
    if (merged.empty()) {
        ++stats.days_dropped_empty;
        std::cerr << "proplab: day " << date << " empty after cleaning, dropped\n";
        return;
    }

    const std::int64_t open =
        config.session_open_ms >= 0 ? config.session_open_ms : merged.front().ts;
    const std::int64_t close =
        config.session_close_ms >= 0 ? config.session_close_ms : merged.back().ts;
    const std::int64_t trim = static_cast<std::int64_t>(config.trim_minutes) * 60'000;

    std::vector<RawRecord> kept;
    kept.reserve(merged.size());
    for (const auto& r : merged)
        if (r.ts >= open + trim && r.ts <= close - trim) kept.push_back(r);
    if (kept.empty()) {
        ++stats.days_dropped_empty;
        std::cerr << "proplab: day " << date << " empty after trimming, dropped\n";
        return;
    }

    // Labels compare mids on the exact half-tick grid; the return of an n event
    // is zero by construction, not by floating-point luck.
    DaySeries day;
    day.date = date;
    day.events.resize(kept.size());
    std::vector<std::int64_t> mids(kept.size());
    for (std::size_t k = 0; k < kept.size(); ++k) {
        TradeEvent& ev = day.events[k];
        ev.t_ms = kept[k].ts;
        ev.sign = kept[k].sign;
        ev.log_mid = std::log(static_cast<double>(kept[k].mid2) * config.tick * 0.5);
        ev.volume = kept[k].volume;
        mids[k] = kept[k].mid2;
    }
    for (std::size_t k = 0; k + 1 < day.events.size(); ++k) {
        if (mids[k + 1] == mids[k]) {
            day.events[k].label = Label::n;
            day.events[k].ret = 0.0;
        } else {
            day.events[k].label = Label::c;
            day.events[k].ret = day.events[k + 1].log_mid - day.events[k].log_mid;
        }
    }
    // The last mid observed in the day is the last event's own pre-trade mid.
    day.events.back().label = Label::n;
    day.events.back().ret = 0.0;

    stats.events_kept += day.events.size();
    data.days.push_back(std::move(day));
}

void finalize_max_lag(InstrumentData& data, int cap) {
    if (data.days.empty()) {
        data.max_lag = 0;
        return;
    }
    const std::size_t shortest = data.shortest_day();
    data.max_lag = static_cast<int>(std::min<std::size_t>(
        shortest > 0 ? shortest - 1 : 0, static_cast<std::size_t>(cap)));
}

constexpr const char* kCanonicalHeader = "date,t,sign,label,log_mid,ret,volume";

// First line that is not a '#' comment (outputs carry a version line).
bool getline_skip_comments(std::istream& in, std::string& line) {
    while (std::getline(in, line))
        if (line.empty() || line[0] != '#') return true;
    return false;
}

}  // namespace

InstrumentData parse_trades(std::istream& raw, const IngestConfig& config,
                            IngestStats* stats_out) {
    IngestStats stats;
    std::string line;
    if (!getline_skip_comments(raw, line)) throw std::runtime_error("parse_trades: empty input");
    const auto header = split_csv(line);
    auto col = [&](const char* name) -> int {
        for (std::size_t i = 0; i < header.size(); ++i)
            if (header[i] == name) return static_cast<int>(i);
        return -1;
    };
    const int c_ts = col("timestamp_ms"), c_price = col("price"), c_bid = col("bid"),
              c_ask = col("ask"), c_vol = col("volume"), c_flags = col("flags"),
              c_date = col("date");
    if (c_ts < 0 || c_price < 0 || c_bid < 0 || c_ask < 0 || c_vol < 0)
        throw std::runtime_error(
            "parse_trades: header must contain timestamp_ms, price, bid, ask, volume");

    // Days keyed by the date column (single unnamed day when absent), in order
    // of first appearance.
    std::vector<std::pair<std::string, std::vector<RawRecord>>> day_groups;
    std::map<std::string, std::size_t> day_index;

    while (std::getline(raw, line)) {
        if (line.empty()) continue;
        ++stats.records_total;
        const auto f = split_csv(line);
        const std::size_t need = static_cast<std::size_t>(
            std::max({c_ts, c_price, c_bid, c_ask, c_vol, c_flags, c_date}));
        if (f.size() <= need) {
            ++stats.rejected_malformed;
            continue;
        }
        std::int64_t ts;
        double price, bid, ask, volume;
        if (!parse_int64_strict(f[static_cast<std::size_t>(c_ts)], ts) ||
            !parse_double_strict(f[static_cast<std::size_t>(c_price)], price) ||
            !parse_double_strict(f[static_cast<std::size_t>(c_bid)], bid) ||
            !parse_double_strict(f[static_cast<std::size_t>(c_ask)], ask) ||
            !parse_double_strict(f[static_cast<std::size_t>(c_vol)], volume)) {
            ++stats.rejected_malformed;
            continue;
        }
        if (c_flags >= 0) {
            const std::string& flags = f[static_cast<std::size_t>(c_flags)];
            if (!flags.empty() && flags != "0") {
                ++stats.rejected_irregular;
                continue;
            }
        }
        if (price <= 0.0 || bid <= 0.0 || ask <= 0.0 || bid > ask || volume < 0.0) {
            ++stats.rejected_irregular;
            continue;
        }
        RawRecord rec;
        rec.ts = ts;
        rec.mid2 = std::llround((bid + ask) / config.tick);
        const std::int64_t price2 = std::llround(2.0 * price / config.tick);
        if (price2 == rec.mid2) {
            ++stats.rejected_at_mid;
            continue;
        }
        rec.sign = price2 > rec.mid2 ? +1 : -1;
        rec.volume = volume;

        const std::string date = c_date >= 0 ? f[static_cast<std::size_t>(c_date)] : "1970-01-01";
        auto it = day_index.find(date);
        if (it == day_index.end()) {
            day_index.emplace(date, day_groups.size());
            day_groups.emplace_back(date, std::vector<RawRecord>{});
            it = day_index.find(date);
        }
        day_groups[it->second].second.push_back(rec);
    }

    std::sort(day_groups.begin(), day_groups.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });

    InstrumentData data;
    data.instrument_id = config.instrument_id;
    for (auto& [date, recs] : day_groups)
        append_event_day(data, date, std::move(recs), config, stats);
    finalize_max_lag(data, config.max_lag_cap);

    if (stats_out) *stats_out = stats;
    if (data.days.empty()) throw std::runtime_error("parse_trades: no usable events after cleaning");
    return data;
}

void write_canonical(std::ostream& out, const InstrumentData& data) {
    out << kCanonicalHeader << '\n';
    char num[3][32];
    for (const auto& day : data.days) {
        for (const auto& ev : day.events) {
            std::snprintf(num[0], sizeof(num[0]), "%.17g", ev.log_mid);
            std::snprintf(num[1], sizeof(num[1]), "%.17g", ev.ret);
            std::snprintf(num[2], sizeof(num[2]), "%.17g", ev.volume);
            out << day.date << ',' << ev.t_ms << ',' << ev.sign << ','
                << label_char(ev.label) << ',' << num[0] << ',' << num[1] << ','
                << num[2] << '\n';
        }
    }
}

InstrumentData read_canonical(std::istream& in, int max_lag_cap, bool strict) {
    std::string line;
    if (!getline_skip_comments(in, line)) throw std::runtime_error("read_canonical: empty input");
    {
        auto h = split_csv(line);
        std::string joined;
        for (std::size_t i = 0; i < h.size(); ++i) joined += (i ? "," : "") + h[i];
        if (joined != kCanonicalHeader)
            throw std::runtime_error("read_canonical: unexpected header: " + joined);
    }

    InstrumentData data;
    data.instrument_id = "canonical";
    std::size_t row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (line.empty()) continue;
        const auto f = split_csv(line);
        if (f.size() != 7) throw std::runtime_error("read_canonical: bad field count at row " + std::to_string(row));
        TradeEvent ev;
        std::int64_t sign;
        if (!parse_int64_strict(f[1], ev.t_ms) || !parse_int64_strict(f[2], sign) ||
            !parse_double_strict(f[4], ev.log_mid) || !parse_double_strict(f[5], ev.ret) ||
            !parse_double_strict(f[6], ev.volume))
            throw std::runtime_error("read_canonical: unparsable row " + std::to_string(row));
        if ((sign != 1 && sign != -1) || ev.volume < 0.0 || (f[3] != "n" && f[3] != "c"))
            throw std::runtime_error("read_canonical: invalid field at row " + std::to_string(row));
        ev.sign = static_cast<int>(sign);
        ev.label = f[3] == "c" ? Label::c : Label::n;
        if (data.days.empty() || data.days.back().date != f[0]) {
            data.days.push_back({f[0], {}});
        }
        data.days.back().events.push_back(ev);
    }
    if (data.days.empty()) throw std::runtime_error("read_canonical: no events");

    for (const auto& day : data.days) {
        for (std::size_t k = 0; k < day.events.size(); ++k) {
            const auto& ev = day.events[k];
            if (k + 1 < day.events.size()) {
                const double diff = day.events[k + 1].log_mid - ev.log_mid;
                if (diff != ev.ret)
                    throw std::runtime_error("read_canonical: ret/log_mid chain broken in day " + day.date);
            }
            if (strict && ((ev.label == Label::n) != (ev.ret == 0.0)))
                throw std::runtime_error(
                    "read_canonical: label inconsistent with return in day " + day.date +
                    " (pass strict=false for model-generated streams)");
        }
    }
    finalize_max_lag(data, max_lag_cap);
    return data;
}

InstrumentData load_events(std::istream& in, const IngestConfig& config, IngestStats* stats) {
    // Peek the header (skipping version comments) to pick the reader.
    std::string header;
    std::string skipped;
    while (std::getline(in, header)) {
        if (!header.empty() && header[0] == '#') continue;
        break;
    }
    if (header.empty()) throw std::runtime_error("load_events: empty input");
    std::string rest((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    std::string all = header + "\n" + rest;
    std::istringstream again(all);
    if (header.rfind("date,t,sign,label", 0) == 0) {
        auto data = read_canonical(again, config.max_lag_cap, /*strict=*/false);
        data.instrument_id = config.instrument_id;
        return data;
    }
    return parse_trades(again, config, stats);
}

double compute_eta(const InstrumentData& data) {
    std::int64_t n_cont = 0, n_alt = 0;
    std::size_t n_moves = 0;
    for (const auto& day : data.days) {
        int prev = 0;
        for (const auto& ev : day.events) {
            if (ev.ret == 0.0) continue;
            const int move = ev.ret > 0.0 ? +1 : -1;
            ++n_moves;
            if (prev != 0) {
                if (move == prev) ++n_cont;
                else ++n_alt;
            }
            prev = move;
        }
    }
    if (n_moves < 2) throw std::runtime_error("compute_eta: fewer than two price moves");
    if (n_alt == 0) throw std::runtime_error("compute_eta: no alternations, eta undefined");
    return static_cast<double>(n_cont) / (2.0 * static_cast<double>(n_alt));
}

std::pair<InstrumentData, InstrumentData> split_odd_even(const InstrumentData& data) {
    if (data.days.size() < 2)
        throw std::runtime_error(
            "split_odd_even: need at least two days; use split=none for in-sample work");
    InstrumentData first, second;
    first.instrument_id = data.instrument_id;
    second.instrument_id = data.instrument_id;
    for (std::size_t i = 0; i < data.days.size(); ++i)
        (i % 2 == 0 ? first : second).days.push_back(data.days[i]);
    finalize_max_lag(first, data.max_lag);
    finalize_max_lag(second, data.max_lag);
    return {std::move(first), std::move(second)};
}

std::vector<double> signs_of(const DaySeries& day) {
    std::vector<double> v(day.events.size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = day.events[i].sign;
    return v;
}

std::vector<double> labeled_signs(const DaySeries& day, Label which) {
    std::vector<double> v(day.events.size(), 0.0);
    for (std::size_t i = 0; i < v.size(); ++i)
        if (day.events[i].label == which) v[i] = day.events[i].sign;
    return v;
}

std::vector<double> returns_of(const DaySeries& day) {
    std::vector<double> v(day.events.size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = day.events[i].ret;
    return v;
}

std::vector<double> labeled_returns(const DaySeries& day, Label which) {
    std::vector<double> v(day.events.size(), 0.0);
    for (std::size_t i = 0; i < v.size(); ++i)
        if (day.events[i].label == which) v[i] = day.events[i].ret;
    return v;
}

std::vector<double> label_indicator(const DaySeries& day, Label which) {
    std::vector<double> v(day.events.size(), 0.0);
    for (std::size_t i = 0; i < v.size(); ++i)
        if (day.events[i].label == which) v[i] = 1.0;
    return v;
}

std::vector<double> log_mid_path(const DaySeries& day) {
    std::vector<double> v(day.events.size() + 1);
    for (std::size_t i = 0; i < day.events.size(); ++i) v[i] = day.events[i].log_mid;
    v.back() = day.events.back().log_mid + day.events.back().ret;
    return v;
}

std::vector<double> signed_volumes(const DaySeries& day) {
    std::vector<double> v(day.events.size());
    for (std::size_t i = 0; i < v.size(); ++i)
        v[i] = day.events[i].sign * day.events[i].volume;
    return v;
}

}  // namespace proplab
