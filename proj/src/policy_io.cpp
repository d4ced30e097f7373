#include "lcmdp/policy_io.hpp"

#include "lcmdp/errors.hpp"

#include "json.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <bit>
#include <cstring>
#include <iomanip>

namespace lcmdp {

static_assert(std::endian::native == std::endian::little, "policy files are written in host byte order");

using nlohmann::json;

std::string policy_header_json(const CaseStudyModel& model) {
    json j;
    j["format"] = "lcmdp-policy-v1";
    j["horizon"] = model.mdp.horizon;
    j["state_count"] = model.mdp.joint_state_count();
    j["action_count"] = model.mdp.joint_action_count();
    j["component_state_index"] = "((sds - 1) * n_cds + (cds - 1)) * n_tau + (tau - 1)";
    j["joint_index"] = "row-major over components, last component fastest";
    j["n_sds"] = model.space.n_sds();
    j["n_cds"] = model.space.n_cds();
    j["n_tau"] = model.space.n_tau();
    j["actions"] = {"DoNothing", "MinorRepair", "MajorRepair"};
    std::vector<std::string> names;
    for (const auto& c : model.mdp.components) {
        names.push_back(c.name);
    }
    j["components"] = names;
    j["discount"] = model.mdp.discount;
    return j.dump();
}

PolicyFileWriter::PolicyFileWriter(const std::filesystem::path& path, const std::string& header_json, int horizon,
                                   std::size_t state_count)
    : out_{path, std::ios::binary | std::ios::trunc}, path_{path}, horizon_{horizon}, state_count_{state_count},
      written_(static_cast<std::size_t>(std::max(horizon, 0)), false) {
    if (!out_) {
        throw std::runtime_error("cannot write " + path.string());
    }
    const std::uint64_t len = header_json.size();
    out_.write(policy_magic, 8);
    out_.write(reinterpret_cast<const char*>(&len), sizeof len);
    out_.write(header_json.data(), static_cast<std::streamsize>(len));
    data_offset_ = 16 + len;
}

void PolicyFileWriter::write_epoch(int epoch, std::span<const std::uint16_t> actions) {
    if (epoch < 0 || epoch >= horizon_ || actions.size() != state_count_) {
        throw std::out_of_range("policy writer: epoch or state count mismatch");
    }
    const auto offset = data_offset_ + static_cast<std::uint64_t>(epoch) * state_count_ * 2;
    out_.seekp(static_cast<std::streamoff>(offset));
    out_.write(reinterpret_cast<const char*>(actions.data()), static_cast<std::streamsize>(actions.size() * 2));
    if (!out_) {
        throw std::runtime_error("write failed: " + path_.string());
    }
    written_[static_cast<std::size_t>(epoch)] = true;
}

void PolicyFileWriter::close() {
    for (bool w : written_) {
        if (!w) {
            throw std::runtime_error("policy writer: missing epochs in " + path_.string());
        }
    }
    out_.close();
}

PolicyFileReader::PolicyFileReader(const std::filesystem::path& path) {
    fd_ = ::open(path.c_str(), O_RDONLY);
    if (fd_ < 0) {
        throw ValidationError("policy file not found: " + path.string());
    }
    char magic[8];
    std::uint64_t len = 0;
    if (::pread(fd_, magic, 8, 0) != 8 || std::memcmp(magic, policy_magic, 8) != 0 ||
        ::pread(fd_, &len, sizeof len, 8) != sizeof len) {
        ::close(fd_);
        throw ValidationError(path.string() + " is not a policy file");
    }
    header_.resize(len);
    if (::pread(fd_, header_.data(), len, 16) != static_cast<ssize_t>(len)) {
        ::close(fd_);
        throw ValidationError(path.string() + ": truncated header");
    }
    data_offset_ = 16 + len;
    try {
        const auto j = json::parse(header_);
        horizon_ = j.at("horizon").get<int>();
        state_count_ = j.at("state_count").get<std::size_t>();
    } catch (const json::exception& e) {
        ::close(fd_);
        throw ValidationError(path.string() + ": bad header: " + e.what());
    }
    const auto end = ::lseek(fd_, 0, SEEK_END);
    if (static_cast<std::uint64_t>(end) != data_offset_ + static_cast<std::uint64_t>(horizon_) * state_count_ * 2) {
        ::close(fd_);
        throw ValidationError(path.string() + ": size does not match the header");
    }
}

PolicyFileReader::~PolicyFileReader() {
    if (fd_ >= 0) {
        ::close(fd_);
    }
}

std::uint16_t PolicyFileReader::action(int epoch, std::size_t state) const {
    if (epoch < 0 || epoch >= horizon_ || state >= state_count_) {
        throw std::out_of_range("policy lookup out of range");
    }
    std::uint16_t a = 0;
    const auto offset = data_offset_ + (static_cast<std::uint64_t>(epoch) * state_count_ + state) * 2;
    if (::pread(fd_, &a, 2, static_cast<off_t>(offset)) != 2) {
        throw std::runtime_error("policy file read failed");
    }
    return a;
}

Policy PolicyFileReader::load_all() const {
    Policy p;
    p.state_count = state_count_;
    p.actions.resize(static_cast<std::size_t>(horizon_));
    for (int t = 0; t < horizon_; ++t) {
        auto& row = p.actions[static_cast<std::size_t>(t)];
        row.resize(state_count_);
        const auto offset = data_offset_ + static_cast<std::uint64_t>(t) * state_count_ * 2;
        const auto bytes = static_cast<ssize_t>(state_count_ * 2);
        if (::pread(fd_, row.data(), static_cast<std::size_t>(bytes), static_cast<off_t>(offset)) != bytes) {
            throw std::runtime_error("policy file read failed");
        }
    }
    return p;
}

void write_policy(const std::filesystem::path& path, const std::string& header_json, const Policy& policy) {
    PolicyFileWriter w(path, header_json, policy.horizon(), policy.state_count);
    for (int t = 0; t < policy.horizon(); ++t) {
        w.write_epoch(t, policy.actions[static_cast<std::size_t>(t)]);
    }
    w.close();
}

Policy read_policy(const std::filesystem::path& path) { return PolicyFileReader(path).load_all(); }

void write_policy_csv(const std::filesystem::path& path, const Policy& policy) {
    std::ofstream out(path);
    if (!out) {
        throw std::runtime_error("cannot write " + path.string());
    }
    out << "epoch,state,action\n";
    for (int t = 0; t < policy.horizon(); ++t) {
        for (std::size_t s = 0; s < policy.state_count; ++s) {
            out << t << ',' << s << ',' << policy.action(t, s) << '\n';
        }
    }
}

void write_values_csv(const std::filesystem::path& path, std::span<const double> values) {
    std::ofstream out(path);
    if (!out) {
        throw std::runtime_error("cannot write " + path.string());
    }
    out << "state,value\n" << std::setprecision(17);
    for (std::size_t s = 0; s < values.size(); ++s) {
        out << s << ',' << values[s] << '\n';
    }
}

} // namespace lcmdp
