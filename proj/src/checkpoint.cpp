#include "esdrnn/checkpoint.hpp"

#include <json.hpp>

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

namespace esdrnn {

namespace {

constexpr char kMagic[8] = {'E', 'S', 'D', 'R', 'N', 'N', 'C', 'K'};

class Writer {
public:
	void u32(std::uint32_t v) {
		for (int i = 0; i < 4; ++i) {
			out_.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
		}
	}
	void u64(std::uint64_t v) {
		for (int i = 0; i < 8; ++i) {
			out_.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
		}
	}
	void f64(double v) {
		u64(std::bit_cast<std::uint64_t>(v));
	}
	void str(const std::string &s) {
		u64(s.size());
		out_ += s;
	}
	void raw(const char *p, std::size_t n) {
		out_.append(p, n);
	}
	std::string take() {
		return std::move(out_);
	}

private:
	std::string out_;
};

class Reader {
public:
	Reader(const std::string &bytes, std::string source) : bytes_(bytes), source_(std::move(source)) {}

	std::uint32_t u32() {
		need(4);
		std::uint32_t v = 0;
		for (int i = 0; i < 4; ++i) {
			v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes_[pos_++])) << (8 * i);
		}
		return v;
	}
	std::uint64_t u64() {
		need(8);
		std::uint64_t v = 0;
		for (int i = 0; i < 8; ++i) {
			v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_++])) << (8 * i);
		}
		return v;
	}
	double f64() {
		return std::bit_cast<double>(u64());
	}
	std::string str() {
		const std::uint64_t n = u64();
		need(n);
		std::string s = bytes_.substr(pos_, n);
		pos_ += n;
		return s;
	}
	void expect(const char *p, std::size_t n) {
		need(n);
		if (std::memcmp(bytes_.data() + pos_, p, n) != 0) {
			fail("not a checkpoint file");
		}
		pos_ += n;
	}
	bool at_end() const {
		return pos_ == bytes_.size();
	}
	[[noreturn]] void fail(const std::string &what) const {
		throw ValidationError(source_ + ": " + what);
	}

private:
	void need(std::uint64_t n) const {
		if (n > bytes_.size() - pos_) {
			fail("truncated checkpoint");
		}
	}

	const std::string &bytes_;
	std::string source_;
	std::size_t pos_ = 0;
};

} // namespace

RunConfig Checkpoint::config() const {
	return parse_run_config(config_json, "checkpoint config");
}

std::vector<std::pair<std::string, es::EsState>> final_es_states(const Model &model,
                                                                 std::span<const HourlySeries> data, int warmup_weeks) {
	std::vector<std::pair<std::string, es::EsState>> out;
	const std::size_t span = static_cast<std::size_t>(warmup_weeks) * kInputWindow;
	for (const auto &s : data) {
		if (s.size() < span) {
			continue;
		}
		SeriesCursor cur = start_cursor(model, s, s.size() - span);
		const int steps = 7 * (warmup_weeks - 1);
		for (int k = 0; k < steps; ++k) {
			advance(model, cur);
		}
		out.emplace_back(s.id, cur.es);
	}
	return out;
}

Checkpoint make_checkpoint(const RunConfig &config, const Trainer &trainer, std::span<const HourlySeries> data) {
	Checkpoint c;
	c.config_json = to_json(config);
	c.seed = trainer.seed;
	c.model = trainer.model;
	c.es_states = final_es_states(trainer.model, data, config.schedule.w_s);
	std::ostringstream rng;
	rng << trainer.rng;
	c.rng_state = rng.str();
	return c;
}

std::string serialize_checkpoint(const Checkpoint &ckpt) {
	Writer w;
	w.raw(kMagic, sizeof kMagic);
	w.u32(kCheckpointVersion);
	w.str(ckpt.config_json);
	w.u64(ckpt.seed);
	w.f64(ckpt.model.i_alpha);
	w.f64(ckpt.model.i_beta);
	auto params = collect_parameters(const_cast<Network &>(ckpt.model.network));
	w.u64(params.size());
	for (const auto &p : params) {
		w.str(p.name);
		w.u64(static_cast<std::uint64_t>(p.value->rows()));
		w.u64(static_cast<std::uint64_t>(p.value->cols()));
		for (Eigen::Index i = 0; i < p.value->size(); ++i) {
			w.f64(p.value->data()[i]);
		}
	}
	w.u64(ckpt.es_states.size());
	for (const auto &[id, s] : ckpt.es_states) {
		w.str(id);
		w.f64(s.level);
		for (double v : s.seasonal) {
			w.f64(v);
		}
		w.u64(s.head);
		w.f64(s.alpha);
		w.f64(s.beta);
		w.f64(s.i_alpha);
		w.f64(s.i_beta);
	}
	w.str(ckpt.rng_state);
	return w.take();
}

Checkpoint deserialize_checkpoint(const std::string &bytes, const std::string &source) {
	Reader r(bytes, source);
	r.expect(kMagic, sizeof kMagic);
	const std::uint32_t version = r.u32();
	if (version != kCheckpointVersion) {
		r.fail("unsupported checkpoint version " + std::to_string(version));
	}
	Checkpoint c;
	c.config_json = r.str();
	const RunConfig config = c.config();
	c.seed = r.u64();
	c.model.i_alpha = r.f64();
	c.model.i_beta = r.f64();

	Rng shape_only(0);
	c.model.network = make_network(config.effective_network(), shape_only);
	auto params = collect_parameters(c.model.network);
	const std::uint64_t n = r.u64();
	if (n != params.size()) {
		r.fail("expected " + std::to_string(params.size()) + " parameters, found " + std::to_string(n));
	}
	for (auto &p : params) {
		const std::string name = r.str();
		const auto rows = static_cast<Eigen::Index>(r.u64());
		const auto cols = static_cast<Eigen::Index>(r.u64());
		if (name != p.name || rows != p.value->rows() || cols != p.value->cols()) {
			r.fail("parameter '" + name + "' " + std::to_string(rows) + "x" + std::to_string(cols) +
			       " does not match '" + p.name + "' " + std::to_string(p.value->rows()) + "x" +
			       std::to_string(p.value->cols()));
		}
		for (Eigen::Index i = 0; i < p.value->size(); ++i) {
			p.value->data()[i] = r.f64();
		}
	}
	const std::uint64_t ns = r.u64();
	for (std::uint64_t k = 0; k < ns; ++k) {
		std::string id = r.str();
		es::EsState s;
		s.level = r.f64();
		for (double &v : s.seasonal) {
			v = r.f64();
		}
		s.head = static_cast<std::size_t>(r.u64());
		s.alpha = r.f64();
		s.beta = r.f64();
		s.i_alpha = r.f64();
		s.i_beta = r.f64();
		es::validate(s);
		c.es_states.emplace_back(std::move(id), s);
	}
	c.rng_state = r.str();
	if (!r.at_end()) {
		r.fail("trailing bytes after checkpoint");
	}
	return c;
}

void save_checkpoint(const std::filesystem::path &path, const Checkpoint &ckpt) {
	{
		std::ofstream f(path, std::ios::binary);
		if (!f) {
			throw ValidationError("cannot write " + path.string());
		}
		const std::string bytes = serialize_checkpoint(ckpt);
		f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
	}
	nlohmann::ordered_json m;
	m["format"] = "esdrnn-checkpoint";
	m["version"] = kCheckpointVersion;
	m["binary"] = path.filename().string();
	m["seed"] = ckpt.seed;
	m["parameter_count"] = parameter_count(ckpt.model.network);
	nlohmann::ordered_json params = nlohmann::ordered_json::array();
	for (const auto &p : collect_parameters(const_cast<Network &>(ckpt.model.network))) {
		params.push_back({{"name", p.name}, {"rows", p.value->rows()}, {"cols", p.value->cols()}});
	}
	m["parameters"] = params;
	nlohmann::ordered_json ids = nlohmann::ordered_json::array();
	for (const auto &[id, s] : ckpt.es_states) {
		ids.push_back(id);
	}
	m["series"] = ids;
	m["config"] = nlohmann::ordered_json::parse(ckpt.config_json);
	std::filesystem::path manifest = path;
	manifest.replace_extension(".json");
	std::ofstream f(manifest, std::ios::binary);
	if (!f) {
		throw ValidationError("cannot write " + manifest.string());
	}
	f << m.dump(2) << '\n';
}

Checkpoint load_checkpoint(const std::filesystem::path &path) {
	std::ifstream f(path, std::ios::binary);
	if (!f) {
		throw ValidationError("cannot open checkpoint " + path.string());
	}
	std::stringstream ss;
	ss << f.rdbuf();
	return deserialize_checkpoint(ss.str(), path.string());
}

std::vector<std::filesystem::path> list_checkpoints(const std::filesystem::path &dir) {
	if (!std::filesystem::is_directory(dir)) {
		throw ValidationError("checkpoint directory " + dir.string() + " does not exist");
	}
	std::vector<std::filesystem::path> out;
	for (const auto &e : std::filesystem::directory_iterator(dir)) {
		if (e.is_regular_file() && e.path().extension() == ".ckpt") {
			out.push_back(e.path());
		}
	}
	std::sort(out.begin(), out.end());
	return out;
}

} // namespace esdrnn
