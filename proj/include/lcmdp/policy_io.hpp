#pragma once

#include "lcmdp/mdp_model.hpp"
#include "lcmdp/solver.hpp"

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>

namespace lcmdp {

/// Binary policy layout: the 8-byte magic "LCMPOL01", a little-endian uint64
/// header length, a JSON header describing the state and action codecs, then
/// horizon x state_count little-endian uint16 joint actions, epoch-major.
inline constexpr char policy_magic[9] = "LCMPOL01";

/// Codec description written into the policy header.
std::string policy_header_json(const CaseStudyModel& model);

/// Streams epochs to disk in any order (the solver produces T-1 first).
class PolicyFileWriter {
public:
    PolicyFileWriter(const std::filesystem::path& path, const std::string& header_json, int horizon,
                     std::size_t state_count);
    void write_epoch(int epoch, std::span<const std::uint16_t> actions);
    /// Throws when an epoch was never written.
    void close();

private:
    std::ofstream out_;
    std::filesystem::path path_;
    std::uint64_t data_offset_ = 0;
    int horizon_;
    std::size_t state_count_;
    std::vector<bool> written_;
};

/// Random access to a policy file without loading it; safe to share between threads.
class PolicyFileReader {
public:
    explicit PolicyFileReader(const std::filesystem::path& path);
    ~PolicyFileReader();
    PolicyFileReader(const PolicyFileReader&) = delete;
    PolicyFileReader& operator=(const PolicyFileReader&) = delete;

    const std::string& header_json() const { return header_; }
    int horizon() const { return horizon_; }
    std::size_t state_count() const { return state_count_; }
    std::uint16_t action(int epoch, std::size_t state) const;
    Policy load_all() const;

private:
    int fd_ = -1;
    std::string header_;
    std::uint64_t data_offset_ = 0;
    int horizon_ = 0;
    std::size_t state_count_ = 0;
};

void write_policy(const std::filesystem::path& path, const std::string& header_json, const Policy& policy);
Policy read_policy(const std::filesystem::path& path);

/// CSV rows (epoch, state, action).
void write_policy_csv(const std::filesystem::path& path, const Policy& policy);
/// CSV rows (state, value).
void write_values_csv(const std::filesystem::path& path, std::span<const double> values);

} // namespace lcmdp
