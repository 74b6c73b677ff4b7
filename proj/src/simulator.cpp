// Copyright 2026 The Resilitest Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#include "resilitest/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <istream>
#include <set>
#include <unordered_map>
#include <unordered_set>

#include <fmt/format.h>

#include "resilitest/common.hpp"
#include "resilitest/target_planner.hpp"
#include "sim_engine.hpp"

namespace resilitest {

namespace {

using sim::kNever;
using sim::Proc;
using sim::Task;

constexpr std::uint64_t kHopUs = 2'000;
constexpr std::uint64_t kFailFastUs = 1'000;

std::uint64_t BaseLatencyUs(Component c) {
  switch (c) {
    case Component::kDatabase:
      return 3'000;
    case Component::kCache:
      return 1'000;
    case Component::kMQ:
      return 2'000;
    default:
      return kHopUs;
  }
}

struct StepResult {
  bool ok = true;
  int code = 0;
};

struct Outcome {
  int status = 200;
};

StepResult Fail(int code) { return {false, code}; }

struct RequestState {
  std::size_t ticket = 0;
  std::uint64_t submit_us = 0;
  bool acked_ok = false;
  bool lost = false;
  bool lost_counted = false;
  bool recording = false;
  std::vector<Span> spans;
  std::vector<bool> closed;
};

struct PermitGuard {
  sim::Semaphore* sem = nullptr;
  PermitGuard() = default;
  PermitGuard(const PermitGuard&) = delete;
  PermitGuard& operator=(const PermitGuard&) = delete;
  ~PermitGuard() {
    if (sem) sem->Release();
  }
};

}  // namespace

EndpointCounters SystemMetrics::At(const std::string& service, const Endpoint& endpoint) const {
  auto it = endpoints.find({service, endpoint});
  return it == endpoints.end() ? EndpointCounters{} : it->second;
}

class System::Impl {
 public:
  struct ServiceRt {
    ServiceRt(sim::Loop& loop, const ServiceSpec& spec)
        : name(spec.name), workers(loop, spec.workers), db_pool(loop, spec.workers) {}
    std::string name;
    sim::Semaphore workers;
    sim::Semaphore db_pool;
  };

  struct InterfaceRt;

  struct StepRt {
    const Step* step = nullptr;
    std::uint32_t service = 0;
    std::uint32_t endpoint_id = 0;
    std::string op;
    int bug = -1;
    const InterfaceRt* callee = nullptr;
    bool write = false;
    bool broken = false;
  };

  struct InterfaceRt {
    const InterfaceSpec* spec = nullptr;
    std::uint32_t service = 0;
    std::vector<StepRt> steps;
  };

  struct EntryRecord {
    std::uint64_t submit_us = 0;
    std::uint64_t complete_us = 0;
    bool done = false;
    EntryResponse response;
    std::shared_ptr<RequestState> state;
  };

  struct Invocation {
    std::uint64_t start_us;
    std::uint32_t endpoint_id;
    bool failed;
  };

  Impl(const TopologySpec& spec, std::uint64_t seed, SystemOptions options)
      : spec_(spec), options_(options), rng_(MixSeed(seed, Digest64(spec_.Digest()))) {
    for (const auto& svc : spec_.services) services_.push_back(std::make_unique<ServiceRt>(loop_, svc));
    for (const auto& b : spec_.Bugs()) bugs_.push_back(b);
    std::map<const InterfaceSpec*, const InterfaceRt*> by_spec;
    interfaces_.reserve(spec_.InterfaceCount());
    for (std::uint32_t si = 0; si < spec_.services.size(); ++si) {
      const auto& svc = spec_.services[si];
      for (const auto& iface : svc.interfaces) {
        InterfaceRt rt;
        rt.spec = &iface;
        rt.service = si;
        for (const auto& step : iface.workflow) {
          StepRt st;
          st.step = &step;
          st.service = si;
          st.endpoint_id = EndpointId(svc.name, step.endpoint);
          st.op = step.Op();
          st.write = !step.IsCall() && IsWriteMethod(step.endpoint.method);
          if (step.bug) {
            std::string id = svc.name + "/" + std::string(BugFlagName(*step.bug)) + "/" +
                             step.endpoint.ToString();
            for (std::size_t b = 0; b < bugs_.size(); ++b) {
              if (bugs_[b].id == id) st.bug = static_cast<int>(b);
            }
          }
          if (!step.mirror.empty()) mirrors_.insert({step.resource, step.mirror});
          rt.steps.push_back(std::move(st));
        }
        interfaces_.push_back(std::move(rt));
        by_spec[&iface] = &interfaces_.back();
      }
    }
    for (auto& rt : interfaces_) {
      for (auto& st : rt.steps) {
        if (!st.step->IsCall()) continue;
        st.callee = by_spec.at(spec_.FindInterface(st.step->target_service, st.step->target_method,
                                                   st.step->target_uri));
      }
    }
    armed_.resize(endpoint_list_.size());
    hit_totals_.resize(endpoint_list_.size());
  }

  ~Impl() { loop_.Teardown(); }

  sim::Loop& loop() { return loop_; }
  std::uint64_t now() const { return loop_.now(); }

  void AdvanceTo(std::uint64_t t) {
    if (t < loop_.now()) return;
    loop_.RunUntil(t);
  }

  std::size_t Submit(const EntryRequest& request) {
    std::size_t ticket = base_ticket_ + entries_.size();
    EntryRecord rec;
    rec.submit_us = loop_.now();
    entries_.push_back(std::move(rec));
    EntryProc(ticket, request);
    return ticket;
  }

  const EntryRecord* Record(std::size_t ticket) const {
    if (ticket < base_ticket_ || ticket - base_ticket_ >= entries_.size()) return nullptr;
    return &entries_[ticket - base_ticket_];
  }

  std::string Sign(const EntryRequest& request) const {
    auto it = request.payload.find("ts");
    return HexDigest("resilitest-gateway-key|" + (it == request.payload.end() ? "" : it->second));
  }

  std::uint32_t FindEndpoint(const std::string& service, const Endpoint& endpoint) const {
    auto it = endpoint_ids_.find({service, endpoint});
    if (it == endpoint_ids_.end()) {
      throw ValidationError("service '" + service + "' never invokes " + endpoint.ToString());
    }
    return it->second;
  }

  void Arm(const std::string& service, const Endpoint& endpoint, const FaultSpec& fault) {
    auto id = FindEndpoint(service, endpoint);
    if (!fault.applies_to.Matches(endpoint)) {
      throw ValidationError("fault " + fault.fault_id + " does not apply to " + endpoint.ToString());
    }
    armed_[id] = fault;
  }
  void Disarm(const std::string& service, const Endpoint& endpoint) {
    armed_[FindEndpoint(service, endpoint)].reset();
  }
  void DisarmAll() {
    for (auto& a : armed_) a.reset();
  }
  std::uint64_t Hits(const std::string& service, const Endpoint& endpoint) const {
    return hit_totals_[FindEndpoint(service, endpoint)];
  }

  SystemMetrics CollectMetrics(const MetricsWindow& w) const {
    if (w.end_us > loop_.now() || w.start_us > w.end_us) {
      throw ValidationError("metrics window must lie within elapsed virtual time");
    }
    auto in = [&](std::uint64_t t) { return t >= w.start_us && t < w.end_us; };
    SystemMetrics m;
    std::vector<std::uint64_t> latencies;
    for (const auto& e : entries_) {
      if (!in(e.submit_us)) continue;
      ++m.entry.requests;
      if (!e.done) continue;
      ++m.entry.completed;
      latencies.push_back(e.complete_us - e.submit_us);
      if (e.response.ok()) ++m.entry.successes;
    }
    if (m.entry.requests > 0) {
      m.entry.success_rate = static_cast<double>(m.entry.successes) / m.entry.requests;
    }
    if (!latencies.empty()) {
      std::sort(latencies.begin(), latencies.end());
      auto rank = [&](double p) {
        auto idx = static_cast<std::size_t>(std::ceil(p * latencies.size()));
        return latencies[std::max<std::size_t>(idx, 1) - 1] / 1000.0;
      };
      m.entry.p50_ms = rank(0.50);
      m.entry.p95_ms = rank(0.95);
    }
    if (w.end_us > w.start_us) {
      m.entry.throughput_rps = m.entry.successes / ((w.end_us - w.start_us) / 1e6);
    }
    for (const auto& inv : invocations_) {
      if (!in(inv.start_us)) continue;
      auto& c = m.endpoints[endpoint_list_[inv.endpoint_id]];
      ++c.invocations;
      if (inv.failed) ++c.failures;
    }
    for (const auto& [t, id] : hits_) {
      if (in(t)) ++m.endpoints[endpoint_list_[id]].fault_hits;
    }
    for (auto t : lost_) {
      if (in(t)) ++m.lost_acked;
    }
    m.mirrors_consistent = MirrorsConsistent();
    return m;
  }

  std::vector<std::string> TriggeredBugs(const MetricsWindow& w) const {
    std::set<std::string> ids;
    for (const auto& [t, b] : bug_events_) {
      if (t >= w.start_us && t < w.end_us) ids.insert(bugs_[b].id);
    }
    return {ids.begin(), ids.end()};
  }

  std::uint64_t Delivered(const std::string& topic) const {
    auto it = delivered_.find(topic);
    return it == delivered_.end() ? 0 : it->second;
  }

  void Compact(std::uint64_t t) {
    while (!entries_.empty() && entries_.front().submit_us < t) {
      entries_.pop_front();
      ++base_ticket_;
    }
    std::erase_if(invocations_, [t](const Invocation& i) { return i.start_us < t; });
    std::erase_if(hits_, [t](const auto& h) { return h.first < t; });
    std::erase_if(lost_, [t](std::uint64_t s) { return s < t; });
  }

  Trace RecordedTrace(std::size_t ticket, const std::string& trace_id) const {
    const EntryRecord* rec = Record(ticket);
    if (!rec || !rec->done) throw ValidationError("request has not completed");
    if (!rec->state || !rec->state->recording) throw ValidationError("trace recording is off");
    const RequestState& rs = *rec->state;
    Trace trace;
    trace.trace_id = trace_id;
    trace.root = "s0";
    trace.spans = rs.spans;
    for (std::size_t i = 0; i < trace.spans.size(); ++i) {
      Span& s = trace.spans[i];
      std::uint64_t end = rs.closed[i] ? s.start_us + s.dur_us : loop_.now();
      if (s.parent) {
        const Span& p = trace.spans[std::stoul(s.parent->substr(1))];
        std::uint64_t pend = p.start_us + p.dur_us;
        if (s.start_us > pend) s.start_us = pend;
        end = std::min(end, pend);
      }
      s.dur_us = end - s.start_us;
    }
    for (auto& s : trace.spans) s.start_us += kWallEpochUs;
    CanonicalizeOrder(trace);
    return trace;
  }

 private:
  std::uint32_t EndpointId(const std::string& service, const Endpoint& endpoint) {
    auto [it, fresh] = endpoint_ids_.emplace(ServiceEndpoint{service, endpoint},
                                             static_cast<std::uint32_t>(endpoint_list_.size()));
    if (fresh) endpoint_list_.push_back({service, endpoint});
    return it->second;
  }

  std::uint64_t Jitter(std::uint64_t base) { return base * 3 / 4 + rng_.Below(base / 2 + 1); }

  void Trigger(int bug) {
    if (bug >= 0) bug_events_.emplace_back(loop_.now(), static_cast<std::size_t>(bug));
  }

  void MarkLost(RequestState& rs) {
    rs.lost = true;
    if (rs.acked_ok && !rs.lost_counted) {
      rs.lost_counted = true;
      lost_.push_back(rs.submit_us);
    }
  }

  bool MirrorsConsistent() const {
    for (const auto& [cache_res, table] : mirrors_) {
      auto c = cache_.find(cache_res);
      if (c == cache_.end()) continue;
      auto d = db_.find(table);
      for (const auto& [k, v] : c->second) {
        if (d == db_.end()) return false;
        auto row = d->second.find(k);
        if (row == d->second.end() || row->second != v) return false;
      }
    }
    return true;
  }

  const InterfaceRt* Route(const EntryRequest& req) {
    std::string line = req.method + " " + req.uri;
    auto it = routes_.find(line);
    if (it != routes_.end()) return it->second;
    const InterfaceRt* found = nullptr;
    for (const auto& rt : interfaces_) {
      if (rt.spec->method == req.method && UriMatches(rt.spec->uri_template, req.uri)) {
        found = &rt;
        break;
      }
    }
    routes_.emplace(std::move(line), found);
    return found;
  }

  int Validate(const InterfaceRt& iface, const EntryRequest& req) {
    const auto& p = req.payload;
    const InterfaceSpec& s = *iface.spec;
    if (s.ts) {
      auto it = p.find("ts");
      if (it == p.end()) return 400;
      std::uint64_t ts = 0;
      try {
        std::size_t used = 0;
        ts = std::stoull(it->second, &used);
        if (used != it->second.size()) return 400;
      } catch (const std::exception&) {
        return 400;
      }
      std::uint64_t wall = kWallEpochUs + loop_.now();
      std::uint64_t skew = ts > wall ? ts - wall : wall - ts;
      if (skew > kMaxClockSkewUs) return 400;
    }
    if (s.sign) {
      auto it = p.find("auth.signature");
      if (it == p.end() || it->second != Sign(req)) return 403;
    }
    std::string session, idem;
    if (s.session) {
      auto it = p.find("session_id");
      if (it == p.end() || it->second.empty() || sessions_.count(it->second)) return 401;
      session = it->second;
    }
    if (s.idem) {
      auto it = p.find("idem_key");
      if (it == p.end() || it->second.empty() || idem_keys_.count(it->second)) return 409;
      idem = it->second;
    }
    if (!session.empty()) sessions_.insert(session);
    if (!idem.empty()) idem_keys_.insert(idem);
    return 0;
  }

  int OpenSpan(RequestState& rs, int parent, const std::string& service, const Endpoint& endpoint,
               const std::string& op, Payload req) {
    if (!rs.recording) return -1;
    Span s;
    s.id = "s" + std::to_string(rs.spans.size());
    if (parent >= 0) s.parent = "s" + std::to_string(parent);
    s.service = service;
    s.endpoint = endpoint;
    s.op = op;
    s.req = std::move(req);
    s.start_us = loop_.now();
    rs.spans.push_back(std::move(s));
    rs.closed.push_back(false);
    return static_cast<int>(rs.spans.size() - 1);
  }

  void CloseSpan(RequestState& rs, int idx, SpanStatus status, Payload resp) {
    if (idx < 0) return;
    Span& s = rs.spans[idx];
    s.status = status;
    s.resp = std::move(resp);
    s.dur_us = loop_.now() - s.start_us;
    rs.closed[idx] = true;
  }

  std::string TokenValue(const std::string& service, const std::string& key,
                         const std::string& token) const {
    return HexDigest(service + "|" + key + "|" + token);
  }

  std::string WriteValue(const RequestState& rs, const std::string& key) const {
    return ToHex(Digest64(key + "|" + std::to_string(rs.ticket)));
  }

  void ApplyEffect(const StepRt& st, const RequestState& rs, const std::string& key) {
    const Step& s = *st.step;
    const std::string& m = s.endpoint.method;
    switch (s.endpoint.component) {
      case Component::kDatabase:
      case Component::kCache: {
        auto& store = s.endpoint.component == Component::kDatabase ? db_ : cache_;
        if (m == "delete") {
          store[s.resource].erase(key);
        } else if (st.write) {
          store[s.resource][key] = WriteValue(rs, key);
        }
        break;
      }
      case Component::kMQ:
        if (st.write) ++delivered_[s.resource];
        break;
      default:
        break;
    }
  }

  void Complete(std::size_t ticket, EntryResponse response, RequestState& rs) {
    if (response.ok()) {
      rs.acked_ok = true;
      if (rs.lost && !rs.lost_counted) {
        rs.lost_counted = true;
        lost_.push_back(rs.submit_us);
      }
    }
    if (ticket < base_ticket_) return;
    EntryRecord& rec = entries_[ticket - base_ticket_];
    rec.done = true;
    rec.complete_us = loop_.now();
    rec.response = std::move(response);
  }

  Proc EntryProc(std::size_t ticket, EntryRequest req) {
    auto rs = std::make_shared<RequestState>();
    rs->ticket = ticket;
    rs->submit_us = loop_.now();
    rs->recording = options_.record_traces;
    if (rs->recording) entries_[ticket - base_ticket_].state = rs;

    EntryResponse resp;
    const InterfaceRt* iface = Route(req);
    std::string service = iface ? services_[iface->service]->name : std::string("gateway");
    int root = OpenSpan(*rs, -1, service, Endpoint{Component::kHTTP, "gateway", req.method},
                        req.method + " " + req.uri, req.payload);
    if (!iface) {
      resp.status = 404;
    } else if (int code = Validate(*iface, req); code != 0) {
      resp.status = code;
    } else {
      auto params = UriParams(iface->spec->uri_template, req.uri);
      std::string key = params.empty() ? std::string("none") : params.front();
      std::uint64_t deadline = loop_.now() + kEntryTimeoutUs;
      auto cell = std::make_shared<sim::Cell<Outcome>>(loop_);
      ServeProc(cell, iface, rs, key, deadline, root);
      std::optional<Outcome> got = co_await cell->Wait(deadline);
      resp.status = got ? got->status : 504;
    }
    if (iface) {
      for (const char* k : {"session_id", "ts", "idem_key"}) {
        auto it = req.payload.find(k);
        if (it != req.payload.end()) resp.body[k] = it->second;
      }
      for (const auto& [k, v] : iface->spec->statics) resp.body[k] = v;
    }
    resp.body["status"] = resp.ok() ? "ok" : "error";
    CloseSpan(*rs, root, resp.ok() ? SpanStatus::Ok() : SpanStatus::Failed(resp.status), resp.body);
    Complete(ticket, std::move(resp), *rs);
  }

  Proc ServeProc(std::shared_ptr<sim::Cell<Outcome>> cell, const InterfaceRt* iface,
                 std::shared_ptr<RequestState> rs, std::string key, std::uint64_t deadline,
                 int parent) {
    ServiceRt& svc = *services_[iface->service];
    bool got = co_await svc.workers.Wait(deadline);
    if (!got) {
      cell->Set(Outcome{503});
      co_return;
    }
    PermitGuard worker;
    worker.sem = &svc.workers;
    Outcome out = co_await RunWorkflow(iface, rs, key, deadline, parent);
    cell->Set(out);
  }

  Task<Outcome> RunWorkflow(const InterfaceRt* iface, std::shared_ptr<RequestState> rs,
                            std::string key, std::uint64_t deadline, int parent) {
    std::map<std::string, std::string> tokens;
    for (const StepRt& cst : iface->steps) {
      StepRt* st = const_cast<StepRt*>(&cst);
      if (st->step->async) {
        AsyncStepProc(st, rs, key, tokens, deadline, parent);
        continue;
      }
      StepResult r = co_await ExecStep(st, rs, key, &tokens, deadline, parent);
      if (r.ok) continue;
      if (st->step->bug == BugFlag::kSwallowThenSucceed) {
        Trigger(st->bug);
        if (st->write) MarkLost(*rs);
        continue;
      }
      if (st->step->on_error == OnError::kPropagate) co_return Outcome{r.code >= 400 ? r.code : 500};
      if (st->write) MarkLost(*rs);
    }
    co_return Outcome{200};
  }

  Proc AsyncStepProc(StepRt* st, std::shared_ptr<RequestState> rs, std::string key,
                     std::map<std::string, std::string> tokens, std::uint64_t deadline, int parent) {
    StepResult r = co_await ExecStep(st, rs, key, &tokens, deadline, parent);
    if (!r.ok) {
      if (st->write) MarkLost(*rs);
      if (st->step->bug == BugFlag::kFireAndForget) Trigger(st->bug);
    }
  }

  Task<StepResult> ExecStep(StepRt* st, std::shared_ptr<RequestState> rs, std::string key,
                            std::map<std::string, std::string>* tokens, std::uint64_t deadline,
                            int parent) {
    StepResult r;
    for (std::uint32_t attempt = 0;; ++attempt) {
      r = co_await Attempt(st, rs, key, tokens, deadline, parent);
      if (r.ok || attempt >= st->step->retries || loop_.now() >= deadline) break;
    }
    if (r.ok && !st->step->produces.empty()) {
      (*tokens)[st->step->produces] = TokenValue(services_[st->service]->name, key, st->step->produces);
    }
    co_return r;
  }

  Task<StepResult> Attempt(StepRt* st, std::shared_ptr<RequestState> rs, std::string key,
                           std::map<std::string, std::string>* tokens, std::uint64_t deadline,
                           int parent) {
    const Step& step = *st->step;
    const std::string& service = services_[st->service]->name;
    std::uint64_t start = loop_.now();
    std::uint64_t step_deadline =
        step.timeout_us ? std::min(start + *step.timeout_us, deadline) : kNever;
    int span = -1;
    if (rs->recording) {
      Payload req{{"key", key}};
      if (!step.uses.empty()) req["in." + step.uses] = (*tokens)[step.uses];
      if (st->write && step.endpoint.method != "delete") req["value"] = WriteValue(*rs, key);
      span = OpenSpan(*rs, parent, service, step.endpoint, st->op, std::move(req));
    }
    PermitGuard conn;
    StepResult r = co_await AttemptBody(st, rs, key, step_deadline, deadline, span, &conn);
    if (!r.ok) {
      if (step.bug == BugFlag::kNoRetry && !st->broken) {
        st->broken = true;
        Trigger(st->bug);
      }
      if (step.bug == BugFlag::kNoRollback && conn.sem) {
        conn.sem = nullptr;
        Trigger(st->bug);
      }
    }
    if (span >= 0) {
      Payload resp;
      if (r.ok) {
        resp["status"] = "ok";
        if (!step.produces.empty()) {
          resp["out." + step.produces] = TokenValue(service, key, step.produces);
        }
      } else {
        resp["error"] = std::to_string(r.code);
      }
      CloseSpan(*rs, span, r.ok ? SpanStatus::Ok() : SpanStatus::Failed(r.code), std::move(resp));
    }
    invocations_.push_back({start, st->endpoint_id, !r.ok});
    co_return r;
  }

  Task<StepResult> AttemptBody(StepRt* st, std::shared_ptr<RequestState> rs, std::string key,
                               std::uint64_t step_deadline, std::uint64_t deadline, int span,
                               PermitGuard* conn) {
    const Step& step = *st->step;
    ServiceRt& svc = *services_[st->service];
    if (step.endpoint.component == Component::kDatabase) {
      bool got = co_await svc.db_pool.Wait(step_deadline);
      if (!got) co_return Fail(504);
      conn->sem = &svc.db_pool;
    }
    if (st->broken) {
      co_await sim::SleepUntil{loop_, loop_.now() + Jitter(kFailFastUs)};
      co_return Fail(503);
    }
    const std::optional<FaultSpec>& fault = armed_[st->endpoint_id];
    if (fault) {
      hits_.emplace_back(loop_.now(), st->endpoint_id);
      ++hit_totals_[st->endpoint_id];
      switch (fault->effect.kind) {
        case FaultEffect::Kind::kThrow:
          if (fault->category == FaultCategory::kCommProtocolError) {
            if (step_deadline == kNever) {
              if (step.bug == BugFlag::kMissingTimeout) Trigger(st->bug);
              co_await sim::Forever{};
            }
            co_await sim::SleepUntil{loop_, step_deadline};
            co_return Fail(504);
          }
          co_await sim::SleepUntil{loop_, loop_.now() + Jitter(kFailFastUs)};
          co_return Fail(500);
        case FaultEffect::Kind::kDelay: {
          std::uint64_t d = EffectiveDelayUs(fault->effect, step.timeout_us);
          if (step_deadline != kNever && loop_.now() + d >= step_deadline) {
            co_await sim::SleepUntil{loop_, step_deadline};
            co_return Fail(504);
          }
          co_await sim::SleepUntil{loop_, loop_.now() + d};
          break;
        }
        case FaultEffect::Kind::kStatus:
          co_await sim::SleepUntil{loop_, loop_.now() + Jitter(kHopUs)};
          co_return Fail(fault->effect.status_code);
      }
    }
    if (step.IsCall()) {
      co_await sim::SleepUntil{loop_, loop_.now() + Jitter(kHopUs)};
      if (loop_.now() >= step_deadline) co_return Fail(504);
      auto cell = std::make_shared<sim::Cell<Outcome>>(loop_);
      ServeProc(cell, st->callee, rs, key, step_deadline == kNever ? deadline : step_deadline, span);
      std::optional<Outcome> got = co_await cell->Wait(step_deadline);
      if (!got) co_return Fail(504);
      if (got->status >= 400) co_return Fail(got->status);
      co_return StepResult{};
    }
    std::uint64_t lat = Jitter(BaseLatencyUs(step.endpoint.component));
    if (step_deadline != kNever && loop_.now() + lat > step_deadline) {
      co_await sim::SleepUntil{loop_, step_deadline};
      co_return Fail(504);
    }
    co_await sim::SleepUntil{loop_, loop_.now() + lat};
    ApplyEffect(*st, *rs, key);
    co_return StepResult{};
  }

  TopologySpec spec_;
  SystemOptions options_;
  sim::Loop loop_;
  Rng rng_;
  std::vector<std::unique_ptr<ServiceRt>> services_;
  std::vector<InterfaceRt> interfaces_;
  std::vector<SeededBug> bugs_;
  std::map<ServiceEndpoint, std::uint32_t> endpoint_ids_;
  std::vector<ServiceEndpoint> endpoint_list_;
  std::vector<std::optional<FaultSpec>> armed_;
  std::vector<std::uint64_t> hit_totals_;
  std::unordered_map<std::string, const InterfaceRt*> routes_;
  std::unordered_set<std::string> sessions_;
  std::unordered_set<std::string> idem_keys_;
  std::set<std::pair<std::string, std::string>> mirrors_;  // (cache keyspace, table)
  std::map<std::string, std::map<std::string, std::string>> db_;
  std::map<std::string, std::map<std::string, std::string>> cache_;
  std::map<std::string, std::uint64_t> delivered_;

  std::deque<EntryRecord> entries_;
  std::size_t base_ticket_ = 0;
  std::vector<Invocation> invocations_;
  std::vector<std::pair<std::uint64_t, std::uint32_t>> hits_;
  std::vector<std::uint64_t> lost_;
  std::vector<std::pair<std::uint64_t, std::size_t>> bug_events_;
};

System::System(const TopologySpec& spec, std::uint64_t seed, SystemOptions options)
    : impl_(std::make_unique<Impl>(spec, seed, options)) {}
System::~System() = default;

std::uint64_t System::now_us() const { return impl_->now(); }
void System::AdvanceTo(std::uint64_t virtual_us) { impl_->AdvanceTo(virtual_us); }
std::size_t System::Submit(const EntryRequest& request) { return impl_->Submit(request); }

bool System::Done(std::size_t ticket) const {
  const auto* rec = impl_->Record(ticket);
  return rec && rec->done;
}

const EntryResponse& System::Response(std::size_t ticket) const {
  const auto* rec = impl_->Record(ticket);
  if (!rec || !rec->done) throw ValidationError("request has not completed");
  return rec->response;
}

Trace System::RecordedTrace(std::size_t ticket, const std::string& trace_id) const {
  return impl_->RecordedTrace(ticket, trace_id);
}

std::string System::Sign(const EntryRequest& request) const { return impl_->Sign(request); }

void System::Arm(const std::string& service, const Endpoint& endpoint, const FaultSpec& fault) {
  impl_->Arm(service, endpoint, fault);
}
void System::Disarm(const std::string& service, const Endpoint& endpoint) {
  impl_->Disarm(service, endpoint);
}
void System::DisarmAll() { impl_->DisarmAll(); }
std::uint64_t System::Hits(const std::string& service, const Endpoint& endpoint) const {
  return impl_->Hits(service, endpoint);
}
SystemMetrics System::CollectMetrics(const MetricsWindow& window) const {
  return impl_->CollectMetrics(window);
}
std::vector<std::string> System::TriggeredBugs(const MetricsWindow& window) const {
  return impl_->TriggeredBugs(window);
}
std::uint64_t System::Delivered(const std::string& topic) const { return impl_->Delivered(topic); }
void System::Compact(std::uint64_t virtual_us) { impl_->Compact(virtual_us); }

std::vector<WorkloadEntry> ParseWorkload(std::istream& in) {
  std::vector<WorkloadEntry> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto t = Trim(line);
    if (t.empty() || t.front() == '#') continue;
    auto f = SplitWhitespace(t);
    if (f.size() < 3) throw ParseError("workload entry needs time, method and uri", line_no);
    WorkloadEntry e;
    try {
      std::size_t used = 0;
      e.at_us = std::stoull(f[0], &used) * 1000;
      if (used != f[0].size()) throw std::invalid_argument("time");
    } catch (const std::exception&) {
      throw ParseError("bad time '" + f[0] + "'", line_no);
    }
    e.method = f[1];
    e.uri = f[2];
    if (e.uri.empty() || e.uri.front() != '/') throw ParseError("uri must start with '/'", line_no);
    for (std::size_t i = 3; i < f.size(); ++i) {
      auto eq = f[i].find('=');
      if (eq == std::string::npos || eq == 0) throw ParseError("field must be key=value", line_no);
      e.fields.emplace_back(f[i].substr(0, eq), f[i].substr(eq + 1));
    }
    out.push_back(std::move(e));
  }
  return out;
}

std::vector<WorkloadEntry> LoadWorkload(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  return ParseWorkload(in);
}

Corpus SimulateRecord(const TopologySpec& spec, std::span<const WorkloadEntry> workload,
                      std::uint64_t seed) {
  Corpus corpus;
  corpus.metadata.seed = seed;
  corpus.metadata.topology_digest = spec.Digest();
  std::vector<const WorkloadEntry*> order;
  for (const auto& e : workload) order.push_back(&e);
  std::stable_sort(order.begin(), order.end(),
                   [](auto* a, auto* b) { return a->at_us < b->at_us; });

  System sys(spec, seed, SystemOptions{true});
  IdSource ids(MixSeed(seed, 0x7265636f7264ULL));
  std::vector<std::size_t> tickets;
  for (const WorkloadEntry* e : order) {
    sys.AdvanceTo(e->at_us);
    EntryRequest req{e->method, e->uri, {}};
    for (const auto& [k, v] : e->fields) {
      if (v == "@fresh") {
        req.payload[k] = ids.Next();
      } else if (v == "@now") {
        req.payload[k] = std::to_string(sys.wall_us());
      } else if (v != "@sign") {
        req.payload[k] = v;
      }
    }
    for (const auto& [k, v] : e->fields) {
      if (v == "@sign") req.payload[k] = sys.Sign(req);
    }
    tickets.push_back(sys.Submit(req));
  }
  if (!order.empty()) sys.AdvanceTo(order.back()->at_us + 2 * kEntryTimeoutUs);
  for (std::size_t i = 0; i < tickets.size(); ++i) {
    corpus.traces.push_back(sys.RecordedTrace(tickets[i], fmt::format("tr-{:06d}", i)));
  }
  corpus.RefreshWindow();
  return corpus;
}

}  // namespace resilitest
