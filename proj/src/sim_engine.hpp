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


// Single-threaded discrete-event loop driven by C++20 coroutines.
//
// Proc: detached process, started on the next loop turn, frees itself on
// completion; frames still suspended at teardown are destroyed by the loop.
// Task<T>: lazily started child computation awaited by its parent.

#pragma once

#include <coroutine>
#include <cstdint>
#include <exception>
#include <limits>
#include <memory>
#include <optional>
#include <queue>
#include <unordered_set>
#include <utility>
#include <vector>

namespace resilitest::sim {

inline constexpr std::uint64_t kNever = std::numeric_limits<std::uint64_t>::max();

class WaitList;

struct WaitNode {
  std::coroutine_handle<> handle;
  WaitList* list = nullptr;
  WaitNode* prev = nullptr;
  WaitNode* next = nullptr;
  std::uint64_t timer = 0;
  bool granted = false;
};

class WaitList {
 public:
  bool empty() const { return head_ == nullptr; }
  void PushBack(WaitNode* n) {
    n->list = this;
    n->prev = tail_;
    n->next = nullptr;
    (tail_ ? tail_->next : head_) = n;
    tail_ = n;
  }
  WaitNode* PopFront() {
    WaitNode* n = head_;
    if (n) Remove(n);
    return n;
  }
  void Remove(WaitNode* n) {
    (n->prev ? n->prev->next : head_) = n->next;
    (n->next ? n->next->prev : tail_) = n->prev;
    n->prev = n->next = nullptr;
    n->list = nullptr;
  }
  void Clear() { head_ = tail_ = nullptr; }

 private:
  WaitNode* head_ = nullptr;
  WaitNode* tail_ = nullptr;
};

class Loop {
 public:
  Loop() = default;
  Loop(const Loop&) = delete;
  Loop& operator=(const Loop&) = delete;
  ~Loop() { Teardown(); }

  std::uint64_t now() const { return now_; }
  bool tearing_down() const { return tearing_down_; }

  void ScheduleResume(std::uint64_t at, std::coroutine_handle<> h) {
    queue_.push({at, seq_++, h.address(), nullptr});
  }
  std::uint64_t ScheduleTimeout(std::uint64_t at, WaitNode* node) {
    std::uint64_t id = seq_++;
    queue_.push({at, id, nullptr, node});
    return id;
  }
  void CancelTimer(std::uint64_t id) { cancelled_.insert(id); }

  /// Wakes `n` (already unlinked) at the current time.
  void Grant(WaitNode* n) {
    n->granted = true;
    if (n->timer) CancelTimer(n->timer);
    ScheduleResume(now_, n->handle);
  }

  /// Runs every event due at or before `until`, then sets the clock to it.
  void RunUntil(std::uint64_t until) {
    while (!queue_.empty() && queue_.top().at <= until) {
      Event e = queue_.top();
      queue_.pop();
      now_ = e.at;
      if (e.node) {
        if (cancelled_.erase(e.seq)) continue;
        WaitNode* n = e.node;
        if (n->list) n->list->Remove(n);
        n->timer = 0;
        n->handle.resume();
      } else {
        std::coroutine_handle<>::from_address(e.handle).resume();
      }
    }
    if (until != kNever && until > now_) now_ = until;
  }

  void Register(void* frame) { frames_.insert(frame); }
  void Unregister(void* frame) {
    if (!tearing_down_) frames_.erase(frame);
  }

  /// Destroys every live process frame without resuming anything.
  void Teardown() {
    if (tearing_down_) return;
    tearing_down_ = true;
    queue_ = {};
    cancelled_.clear();
    std::vector<void*> frames(frames_.begin(), frames_.end());
    frames_.clear();
    for (void* f : frames) std::coroutine_handle<>::from_address(f).destroy();
  }

 private:
  struct Event {
    std::uint64_t at;
    std::uint64_t seq;
    void* handle;
    WaitNode* node;
    bool operator>(const Event& o) const { return at != o.at ? at > o.at : seq > o.seq; }
  };

  std::uint64_t now_ = 0;
  std::uint64_t seq_ = 1;
  bool tearing_down_ = false;
  std::priority_queue<Event, std::vector<Event>, std::greater<>> queue_;
  std::unordered_set<std::uint64_t> cancelled_;
  std::unordered_set<void*> frames_;
};

/// Detached process. The owning object (first coroutine parameter, usually
/// the implicit `this`) must expose `sim::Loop& loop()`.
struct Proc {
  struct promise_type {
    template <typename Owner, typename... Args>
    explicit promise_type(Owner& owner, Args&&...) : loop(&owner.loop()) {}

    Proc get_return_object() {
      auto h = std::coroutine_handle<promise_type>::from_promise(*this);
      loop->Register(h.address());
      loop->ScheduleResume(loop->now(), h);
      return {};
    }
    std::suspend_always initial_suspend() noexcept { return {}; }
    std::suspend_never final_suspend() noexcept { return {}; }
    void return_void() {}
    void unhandled_exception() { std::terminate(); }
    ~promise_type() {
      loop->Unregister(std::coroutine_handle<promise_type>::from_promise(*this).address());
    }

    Loop* loop;
  };
};

template <typename T>
class [[nodiscard]] Task {
 public:
  struct promise_type {
    std::optional<T> value;
    std::coroutine_handle<> continuation;

    Task get_return_object() {
      return Task(std::coroutine_handle<promise_type>::from_promise(*this));
    }
    std::suspend_always initial_suspend() noexcept { return {}; }
    auto final_suspend() noexcept {
      struct Final {
        bool await_ready() noexcept { return false; }
        std::coroutine_handle<> await_suspend(std::coroutine_handle<promise_type> h) noexcept {
          return h.promise().continuation;
        }
        void await_resume() noexcept {}
      };
      return Final{};
    }
    void return_value(T v) { value = std::move(v); }
    void unhandled_exception() { std::terminate(); }
  };

  explicit Task(std::coroutine_handle<promise_type> h) : handle_(h) {}
  Task(Task&& o) noexcept : handle_(std::exchange(o.handle_, {})) {}
  Task(const Task&) = delete;
  ~Task() {
    if (handle_) handle_.destroy();
  }

  bool await_ready() const noexcept { return false; }
  std::coroutine_handle<> await_suspend(std::coroutine_handle<> cont) noexcept {
    handle_.promise().continuation = cont;
    return handle_;
  }
  T await_resume() { return std::move(*handle_.promise().value); }

 private:
  std::coroutine_handle<promise_type> handle_;
};

struct SleepUntil {
  Loop& loop;
  std::uint64_t at;
  bool await_ready() const noexcept { return at <= loop.now(); }
  void await_suspend(std::coroutine_handle<> h) { loop.ScheduleResume(at, h); }
  void await_resume() const noexcept {}
};

/// Suspends for good; the frame is reclaimed at teardown.
struct Forever {
  bool await_ready() const noexcept { return false; }
  void await_suspend(std::coroutine_handle<>) const noexcept {}
  void await_resume() const noexcept {}
};

/// Counting semaphore with FIFO waiters and deadline-bounded acquisition.
class Semaphore {
 public:
  Semaphore(Loop& loop, std::uint32_t permits) : loop_(&loop), available_(permits) {}
  Semaphore(const Semaphore&) = delete;
  Semaphore& operator=(const Semaphore&) = delete;

  struct Acquire {
    Semaphore& sem;
    std::uint64_t deadline;
    WaitNode node{};

    bool await_ready() {
      if (sem.available_ > 0 && sem.waiters_.empty()) {
        --sem.available_;
        node.granted = true;
        return true;
      }
      return deadline <= sem.loop_->now();
    }
    void await_suspend(std::coroutine_handle<> h) {
      node.handle = h;
      sem.waiters_.PushBack(&node);
      if (deadline != kNever) node.timer = sem.loop_->ScheduleTimeout(deadline, &node);
    }
    /// True when a permit was obtained.
    bool await_resume() const noexcept { return node.granted; }
  };

  Acquire Wait(std::uint64_t deadline) { return Acquire{*this, deadline}; }

  void Release() {
    if (loop_->tearing_down()) return;
    if (WaitNode* n = waiters_.PopFront()) {
      loop_->Grant(n);
    } else {
      ++available_;
    }
  }

  std::uint32_t available() const { return available_; }

 private:
  Loop* loop_;
  std::uint32_t available_;
  WaitList waiters_;
};

/// Single-assignment result slot with one deadline-bounded waiter.
template <typename T>
class Cell {
 public:
  explicit Cell(Loop& loop) : loop_(&loop) {}

  void Set(T v) {
    if (value_ || loop_->tearing_down()) return;
    value_ = std::move(v);
    if (WaitNode* n = waiter_.PopFront()) loop_->Grant(n);
  }
  bool ready() const { return value_.has_value(); }

  struct Await {
    Cell& cell;
    std::uint64_t deadline;
    WaitNode node{};

    bool await_ready() const { return cell.value_.has_value() || deadline <= cell.loop_->now(); }
    void await_suspend(std::coroutine_handle<> h) {
      node.handle = h;
      cell.waiter_.PushBack(&node);
      if (deadline != kNever) node.timer = cell.loop_->ScheduleTimeout(deadline, &node);
    }
    /// Empty when the deadline passed first.
    std::optional<T> await_resume() const { return cell.value_; }
  };

  Await Wait(std::uint64_t deadline) { return Await{*this, deadline}; }

 private:
  Loop* loop_;
  std::optional<T> value_;
  WaitList waiter_;
};

}  // namespace resilitest::sim
