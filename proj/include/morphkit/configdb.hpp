#pragma once

// Unit-cell configuration dataset with rotation-invariant nearest-neighbour retrieval.
//
// Retrieval is two-stage: a k-d tree shortlist in angle space (interior angles do not change
// under rigid rotation) followed by closed-form 2D Procrustes alignment of each shortlisted
// record onto the query coordinates. The record with the smallest aligned residual wins.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <limits>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "morphkit/csv.hpp"
#include "morphkit/kdtree.hpp"
#include "morphkit/parallel.hpp"
#include "morphkit/random.hpp"
#include "morphkit/surrogate.hpp"

namespace morphkit {

using RecordId = std::int64_t;

struct ConfigRecord {
    RecordId id = 0;
    InfillDesign design;
    CellConfig config;
};

struct Alignment {
    double rotation = 0.0;  // rad; R(rotation) * b best matches a
    double residual = 0.0;  // ||a - R b||_2 over all 16 coordinates, mm
};

/// Orthogonal Procrustes in 2D (rotations only), rotating b onto a. Both sets must be centered.
inline Alignment procrustes_align(const Octagon& a, const Octagon& b) {
    constexpr double kCenterTol = 1e-12;
    if (centroid(a).norm() > kCenterTol || centroid(b).norm() > kCenterTol)
        throw ValidationError("procrustes_align requires centered point sets");
    double s = 0, c = 0;
    for (int j = 0; j < kCellVertices; ++j) {
        s += a[j].y() * b[j].x() - a[j].x() * b[j].y();
        c += a[j].dot(b[j]);
    }
    Alignment out;
    out.rotation = std::atan2(s, c);
    const double cs = std::cos(out.rotation), sn = std::sin(out.rotation);
    double r2 = 0;
    for (int j = 0; j < kCellVertices; ++j) {
        const Vec2 rb(cs * b[j].x() - sn * b[j].y(), sn * b[j].x() + cs * b[j].y());
        r2 += (a[j] - rb).squaredNorm();
    }
    out.residual = std::sqrt(r2);
    return out;
}

struct Match {
    RecordId record = -1;
    double rotation = 0.0;
    double dissimilarity = std::numeric_limits<double>::infinity();
};

/// Immutable after construction; safe for concurrent queries.
class ConfigDatabase {
public:
    using AnglePoint = KdTree<kCellVertices>::Point;

    ConfigDatabase() = default;

    explicit ConfigDatabase(std::vector<ConfigRecord> records) : records_(std::move(records)) {
        std::vector<AnglePoint> pts;
        pts.reserve(records_.size());
        for (std::size_t i = 0; i < records_.size(); ++i) {
            if (records_[i].id != static_cast<RecordId>(i))
                throw ValidationError("record ids must be 0..n-1 in order (row " + std::to_string(i) + ")");
            pts.push_back(records_[i].config.angles);
        }
        index_ = KdTree<kCellVertices>(std::move(pts));
    }

    std::size_t size() const { return records_.size(); }
    bool empty() const { return records_.empty(); }
    const ConfigRecord& record(RecordId id) const { return records_.at(static_cast<std::size_t>(id)); }
    const std::vector<ConfigRecord>& records() const { return records_; }
    const KdTree<kCellVertices>& angle_index() const { return index_; }

    /// Angle-space shortlist.
    std::vector<RecordId> shortlist(const Angles& angles, std::size_t k) const {
        std::vector<RecordId> out;
        for (const auto& n : index_.knn(angles, k)) out.push_back(n.index);
        return out;
    }

    /// Best aligned record among the angle-space shortlist and, if given, a hint record
    /// (the caller's previous assignment, so repeated queries never get worse).
    Match nearest(const CellConfig& query, std::size_t shortlist_k = 32, std::optional<RecordId> hint = {}) const {
        if (empty()) throw ValidationError("configuration database is empty");
        if (shortlist_k == 0) throw ValidationError("shortlist_k must be at least 1");
        Match best;
        auto consider = [&](RecordId id) {
            const Alignment al = procrustes_align(query.coords, records_[static_cast<std::size_t>(id)].config.coords);
            if (al.residual < best.dissimilarity || (al.residual == best.dissimilarity && id < best.record)) {
                best = {id, al.rotation, al.residual};
            }
        };
        for (const auto& n : index_.knn(query.angles, shortlist_k)) consider(n.index);
        if (hint && *hint >= 0 && static_cast<std::size_t>(*hint) < records_.size()) consider(*hint);
        return best;
    }

    /// Reference path: aligns every record.
    Match nearest_exhaustive(const CellConfig& query) const {
        Match best;
        for (const auto& r : records_) {
            const Alignment al = procrustes_align(query.coords, r.config.coords);
            if (al.residual < best.dissimilarity) best = {r.id, al.rotation, al.residual};
        }
        return best;
    }

private:
    std::vector<ConfigRecord> records_;
    KdTree<kCellVertices> index_;
};

/// Free-function form of ConfigDatabase::nearest.
inline Match nearest_config(const ConfigDatabase& db, const CellConfig& query, std::size_t shortlist_k = 32) {
    return db.nearest(query, shortlist_k);
}

namespace detail {
inline InfillDesign draw_design(SampleStream& s) {
    InfillDesign x;
    for (auto& b : x.beams) b.radius = s.uniform(DesignBounds::radius_min, DesignBounds::radius_max);
    for (auto& b : x.beams) b.thickness = s.uniform(DesignBounds::thickness_min, DesignBounds::thickness_max);
    for (auto& b : x.beams) b.orientation = s.sign();
    return x;
}
}  // namespace detail

/// Uniform samples over the design bounds; sample i is the first draw of stream (seed, i).
inline std::vector<InfillDesign> sample_designs(std::size_t n, std::uint64_t seed) {
    if (n < 1) throw ValidationError("sample_designs requires n >= 1");
    std::vector<InfillDesign> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        SampleStream s(seed, i);
        out[i] = detail::draw_design(s);
    }
    return out;
}

struct DatasetOptions {
    double edge_length = kDefaultEdgeLength;
    double max_discard_rate = 0.10;
    int max_attempts_per_record = 100;
};

struct DatasetStats {
    std::size_t attempts = 0;
    std::size_t discarded = 0;
    Angles min_deviation{};  // per-angle min/max of (theta - rest)
    Angles max_deviation{};

    double discard_rate() const { return attempts ? static_cast<double>(discarded) / static_cast<double>(attempts) : 0.0; }
};

inline DatasetStats angle_envelope(const ConfigDatabase& db) {
    DatasetStats st;
    st.min_deviation.fill(std::numeric_limits<double>::infinity());
    st.max_deviation.fill(-std::numeric_limits<double>::infinity());
    const Angles rest = rest_angles();
    for (const auto& r : db.records())
        for (int j = 0; j < kCellVertices; ++j) {
            const double d = r.config.angles[j] - rest[j];
            st.min_deviation[j] = std::min(st.min_deviation[j], d);
            st.max_deviation[j] = std::max(st.max_deviation[j], d);
        }
    return st;
}

/// Builds a dataset of exactly n records. Record 0 is the neutral design (the undeformed
/// cell); record i >= 1 comes from stream (seed, i), redrawing from the same stream whenever
/// the surrogate rejects a sample. Aborts if more than 10% of all draws are rejected.
inline ConfigDatabase generate_dataset(std::size_t n, std::uint64_t seed, const MaterialParams& mat,
                                       const DatasetOptions& opt = {}, DatasetStats* stats = nullptr) {
    if (n < 1) throw ValidationError("generate_dataset requires n >= 1");
    mat.validate();
    std::vector<ConfigRecord> records(n);
    std::vector<std::uint32_t> tries(n, 1);
    records[0] = {0, neutral_design(), surrogate_forward(neutral_design(), mat, opt.edge_length)};

    std::vector<std::string> failure(n);
    parallel_for(n - 1, [&](std::size_t k) {
        const std::size_t i = k + 1;
        SampleStream s(seed, i);
        for (int attempt = 1;; ++attempt) {
            InfillDesign x = detail::draw_design(s);
            try {
                records[i] = {static_cast<RecordId>(i), x, surrogate_forward(x, mat, opt.edge_length)};
                tries[i] = static_cast<std::uint32_t>(attempt);
                return;
            } catch (const ClosureError& e) {
                if (attempt >= opt.max_attempts_per_record) {
                    failure[i] = e.what();
                    tries[i] = static_cast<std::uint32_t>(attempt);
                    return;
                }
            }
        }
    });

    DatasetStats st;
    for (std::size_t i = 0; i < n; ++i) {
        st.attempts += tries[i];
        st.discarded += tries[i] - 1;
        if (!failure[i].empty()) ++st.discarded;
    }
    if (st.discard_rate() > opt.max_discard_rate)
        throw NumericalError("dataset generation discarded " + std::to_string(st.discarded) + " of " +
                             std::to_string(st.attempts) + " samples (> " +
                             std::to_string(static_cast<int>(100 * opt.max_discard_rate)) +
                             "%): design bounds or material gain are mis-tuned");
    for (std::size_t i = 0; i < n; ++i)
        if (!failure[i].empty())
            throw NumericalError("record " + std::to_string(i) + " could not be generated: " + failure[i]);

    ConfigDatabase db(std::move(records));
    const auto env = angle_envelope(db);
    st.min_deviation = env.min_deviation;
    st.max_deviation = env.max_deviation;
    if (stats) *stats = st;
    return db;
}

inline std::vector<std::string> dataset_header() {
    std::vector<std::string> h{"id"};
    for (const char* p : {"r", "h", "b", "th"}) {
        auto cols = numbered(p, kCellVertices);
        h.insert(h.end(), cols.begin(), cols.end());
    }
    return h;
}

/// CSV `id,r1..r8,h1..h8,b1..b8,th1..th8`; radii/thickness in mm, angles in radians.
inline void write_dataset(std::ostream& os, const ConfigDatabase& db) {
    os << join(dataset_header()) << '\n';
    for (const auto& r : db.records()) {
        os << r.id;
        for (const auto& b : r.design.beams) os << ',' << fmt_double(b.radius);
        for (const auto& b : r.design.beams) os << ',' << fmt_double(b.thickness);
        for (const auto& b : r.design.beams) os << ',' << b.orientation;
        for (double t : r.config.angles) os << ',' << fmt_double(t);
        os << '\n';
    }
}

struct DatasetLoadOptions {
    double edge_length = kDefaultEdgeLength;
    MaterialParams material{};
    std::size_t verify_samples = 1000;  // records regenerated through the surrogate on load
    double verify_tol = 1e-9;
};

/// Loads a dataset file; coordinates are rebuilt from the stored angles. A strided subset of
/// records is regenerated from its design and must reproduce the stored angles.
inline ConfigDatabase read_dataset(std::istream& is, const DatasetLoadOptions& opt = {}) {
    const auto table = read_csv(is, dataset_header());
    std::vector<ConfigRecord> records;
    records.reserve(table.rows.size());
    for (std::size_t i = 0; i < table.rows.size(); ++i) {
        const auto& row = table.rows[i];
        const std::size_t line = table.line_numbers[i];
        ConfigRecord r;
        r.id = parse_int(row[0], line);
        for (int k = 0; k < kCellVertices; ++k) {
            r.design.beams[k].radius = parse_double(row[1 + k], line);
            r.design.beams[k].thickness = parse_double(row[9 + k], line);
            r.design.beams[k].orientation = static_cast<int>(parse_int(row[17 + k], line));
            r.config.angles[k] = parse_double(row[25 + k], line);
        }
        if (auto v = design_violation(r.design); !v.empty())
            throw ValidationError("row " + std::to_string(line) + ": " + v);
        try {
            r.config.coords = octagon_from_angles(r.config.angles, opt.edge_length);
        } catch (const ClosureError& e) {
            throw ValidationError("row " + std::to_string(line) + ": stored angles do not close: " + e.what());
        }
        records.push_back(std::move(r));
    }
    if (records.empty()) throw ValidationError("dataset has no records");

    const std::size_t stride =
        opt.verify_samples == 0 ? 0 : std::max<std::size_t>(1, records.size() / std::min(records.size(), opt.verify_samples));
    if (stride > 0)
        for (std::size_t i = 0; i < records.size(); i += stride) {
            const auto cfg = surrogate_forward(records[i].design, opt.material, opt.edge_length);
            for (int j = 0; j < kCellVertices; ++j)
                if (std::abs(cfg.angles[j] - records[i].config.angles[j]) > opt.verify_tol)
                    throw ValidationError("row " + std::to_string(table.line_numbers[i]) +
                                          ": stored angles disagree with the surrogate regeneration");
        }
    return ConfigDatabase(std::move(records));
}

}  // namespace morphkit
