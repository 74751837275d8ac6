#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "kronos/hash.hpp"
#include "kronos/kernel_image.hpp"

namespace kronos {

using Handle = std::uint32_t;

inline constexpr std::uint32_t kMaxDelay = 0xFFFFFFFFu;

// Byte offsets of kernel structures inside the image. Field order follows
// the FreeRTOS declarations; every scalar is 32-bit except the 8-bit
// notification state and delay-aborted flag.
namespace layout {
inline constexpr std::uint32_t kItemValue = 0;
inline constexpr std::uint32_t kItemNext = 4;
inline constexpr std::uint32_t kItemPrev = 8;
inline constexpr std::uint32_t kItemOwner = 12;
inline constexpr std::uint32_t kItemContainer = 16;
inline constexpr std::uint32_t kListItemSize = 20;
inline constexpr std::uint32_t kMiniItemSize = 12;

inline constexpr std::uint32_t kListCount = 0;
inline constexpr std::uint32_t kListIndex = 4;
inline constexpr std::uint32_t kListEnd = 8;
inline constexpr std::uint32_t kListSize = 20;

inline constexpr std::uint32_t kTopOfStack = 0;
inline constexpr std::uint32_t kStateItem = 4;
inline constexpr std::uint32_t kEventItem = 24;
inline constexpr std::uint32_t kPriority = 44;
inline constexpr std::uint32_t kStack = 48;
inline constexpr std::uint32_t kTaskName = 52;
inline constexpr std::uint32_t kTaskNameLen = 16;
inline constexpr std::uint32_t kTcbNumber = 68;
inline constexpr std::uint32_t kTaskNumber = 72;
inline constexpr std::uint32_t kBasePriority = 76;
inline constexpr std::uint32_t kMutexesHeld = 80;
inline constexpr std::uint32_t kTaskTag = 84;
inline constexpr std::uint32_t kRunTimeCounter = 88;
inline constexpr std::uint32_t kNotifiedValue = 92;
inline constexpr std::uint32_t kNotifyState = 96;
inline constexpr std::uint32_t kDelayAborted = 97;
inline constexpr std::uint32_t kTcbSize = 100;

inline constexpr std::uint32_t kQueueWaiting = 0;
inline constexpr std::uint32_t kQueueLength = 4;
inline constexpr std::uint32_t kQueueItemSize = 8;
inline constexpr std::uint32_t kQueueRead = 12;
inline constexpr std::uint32_t kQueueWrite = 16;
inline constexpr std::uint32_t kQueueStorage = 20;
inline constexpr std::uint32_t kQueueCapacity = 8;
inline constexpr std::uint32_t kQueueEntry = 8;
inline constexpr std::uint32_t kQueueSize = kQueueStorage + kQueueCapacity * kQueueEntry;

inline constexpr std::uint32_t kTimerPeriod = 0;
inline constexpr std::uint32_t kTimerItem = 4;
inline constexpr std::uint32_t kTimerAutoReload = 24;
inline constexpr std::uint32_t kTimerCallback = 28;
inline constexpr std::uint32_t kTimerSize = 32;

// Saved context pushed on a task stack at switch-out.
inline constexpr std::uint32_t kContextFrame = 16;
inline constexpr std::uint32_t kStackFill = 0xA5A5A5A5u;

inline constexpr std::uint8_t kNotifyNotWaiting = 0;
inline constexpr std::uint8_t kNotifyReceived = 2;
}  // namespace layout

/// Kernel globals (scheduler variables and pointers), in catalog order.
enum class Var : std::uint8_t {
    uxCurrentNumberOfTasks,
    uxDeletedTasksWaitingCleanup,
    xPendedTicks,
    uxTaskNumber,
    uxTopReadyPriority,
    xNextTaskUnblockTime,
    xTickCount,
    xNumOfOverflows,
    xSchedulerRunning,
    xTimerQueue,
    xTimerTaskHandle,
    xYieldPending,
    pxCurrentTCB,
    pxCurrentTimerList,
    pxDelayedTaskList,
    pxOverflowDelayedTaskList,
    pxOverflowTimerList,
    xIdleTaskHandle,
    count_,
};
inline constexpr std::size_t kVarCount = static_cast<std::size_t>(Var::count_);
inline constexpr std::size_t kScalarVarCount = 12;
const char* var_name(Var v);

/// Statically allocated kernel lists other than the ready lists.
enum class KList : std::uint8_t {
    xDelayedTaskList1,
    xDelayedTaskList2,
    xPendingReadyList,
    xActiveTimerList1,
    xActiveTimerList2,
    xSuspendedTaskList,
    xTasksWaitingTermination,
    count_,
};
inline constexpr std::size_t kKListCount = static_cast<std::size_t>(KList::count_);
const char* list_name(KList l);

struct KernelConfig {
    std::uint32_t tick_rate_hz = 1000;
    std::uint32_t priorities = 7;
    std::uint32_t image_capacity = KernelImage::kDefaultCapacity;
    std::uint32_t idle_stack_words = 64;
    std::uint32_t timer_stack_words = 128;
    // List traversals may take at most this many steps per allocated list item.
    std::uint32_t traversal_budget_factor = 10;
};

enum class PanicReason { invalid_handle, unmapped_access, traversal_overrun, stack_overflow, assertion };
const char* to_string(PanicReason reason);
std::optional<PanicReason> parse_panic_reason(std::string_view text);

/// Simulated kernel crash. Terminates the current run only.
class KernelPanic : public std::runtime_error {
public:
    KernelPanic(PanicReason reason, std::uint32_t tick, std::string detail);
    PanicReason reason() const noexcept { return reason_; }
    std::uint32_t tick() const noexcept { return tick_; }
    const std::string& detail() const noexcept { return detail_; }

private:
    PanicReason reason_;
    std::uint32_t tick_;
    std::string detail_;
};

enum class EventKind { task_switch_in, task_switch_out, task_create, task_delete, tick_overflow, timer_fire, shutdown };
const char* to_string(EventKind kind);
std::optional<EventKind> parse_event_kind(std::string_view text);

struct KernelEvent {
    std::uint32_t tick = 0;
    EventKind kind = EventKind::task_create;
    std::string task;
    std::string detail;

    // `tick=<n> kind=<k> task=<name> detail=<text>`
    std::string format() const;
    static std::optional<KernelEvent> parse(std::string_view line);
    friend bool operator==(const KernelEvent&, const KernelEvent&) = default;
};

enum class EventRecording { none, digest, full };

enum class SliceAction { yield, delay, done };
struct SliceResult {
    SliceAction action = SliceAction::yield;
    std::uint32_t delay_ticks = 0;
};

enum class IdleVerdict { keep_running, shutdown };
enum class TaskRole { user, idle, timer_daemon };

class Kernel;

/// Body of a task. One call runs the task from its last yield point to the
/// next one.
class TaskBody {
public:
    virtual ~TaskBody() = default;
    virtual SliceResult run_slice(Kernel& kernel) = 0;
};

// Kernel features a task has exercised; drives target validity.
struct TaskFeatures {
    bool notification_used = false;
    bool mutex_used = false;
    bool tag_set = false;
};

/// FreeRTOS-style cooperative kernel. Every piece of kernel state lives in
/// the image; host-side members only hold what a real system keeps outside
/// kernel data (task code, the simulation clock, the event log).
class Kernel {
public:
    // Creates the image, all scheduler objects, the idle task and the timer
    // daemon. The scheduler is not started.
    explicit Kernel(KernelConfig config = {});

    Kernel(const Kernel&) = delete;
    Kernel& operator=(const Kernel&) = delete;

    const KernelConfig& config() const { return config_; }
    KernelImage& image() { return image_; }
    const KernelImage& image() const { return image_; }

    std::uint32_t var_address(Var v) const { return var_addr_[static_cast<std::size_t>(v)]; }
    std::uint32_t var(Var v) const;
    void set_var(Var v, std::uint32_t value);
    std::uint32_t list_address(KList l) const { return list_addr_[static_cast<std::size_t>(l)]; }
    std::uint32_t ready_list_address(std::uint32_t priority) const {
        return ready_base_ + priority * layout::kListSize;
    }

    Handle task_create(const std::string& name, std::uint32_t priority, std::uint32_t stack_words,
                       std::unique_ptr<TaskBody> body, TaskRole role = TaskRole::user);
    Handle timer_create(const std::string& name, std::uint32_t period, bool auto_reload);
    // Posts a start command on the timer queue.
    void timer_start(Handle timer);
    void start_scheduler();

    // -- intrusive lists -----------------------------------------------------
    void list_init(Handle list);
    void list_insert_end(Handle list, Handle item);
    void list_insert_ordered(Handle list, Handle item);
    // Returns the number of items left in the owning list.
    std::uint32_t list_remove(Handle item);
    // Checked traversal from the end marker; verifies the item count.
    std::vector<Handle> list_items(Handle list) const;

    // -- scheduling ------------------------------------------------------------
    void tick_advance();
    // Context switch: save current task, select the next ready task, restore it.
    Handle schedule_next();
    // Runs the current task until its next yield point.
    void run_slice();
    void task_delete_self();
    void task_delay(std::uint32_t ticks);
    IdleVerdict idle_step();
    void timer_daemon_step();

    // -- services used by task bodies -------------------------------------------
    void mutex_take();
    void mutex_give();
    void notify_self(std::uint32_t value);
    std::uint32_t notify_take();
    void set_task_tag(std::uint32_t tag);
    std::uint32_t tick_count() const { return var(Var::xTickCount); }
    // configASSERT equivalent.
    void require(bool condition, const std::string& what) const;

    // -- introspection -----------------------------------------------------------
    Handle current_tcb() const { return var(Var::pxCurrentTCB); }
    Handle idle_tcb() const { return idle_tcb_; }
    Handle timer_tcb() const { return timer_tcb_; }
    std::optional<Handle> tcb_of(const std::string& task_name) const;
    std::string task_name(Handle tcb) const;
    std::optional<TaskRole> role_of(Handle tcb) const;
    TaskFeatures features(Handle tcb) const;
    bool shutdown_requested() const { return shutdown_; }
    std::uint32_t traversal_budget() const;
    std::uint32_t timer_fires() const { return timer_fires_; }

    // Host clock used to timestamp events (simulated ticks since start).
    void set_clock(std::uint32_t tick) { clock_ = tick; }
    std::uint32_t clock() const { return clock_; }
    void set_event_recording(EventRecording mode) { recording_ = mode; }
    const std::vector<KernelEvent>& events() const { return events_; }
    std::uint64_t event_digest() const { return event_hash_.value(); }
    void emit(EventKind kind, Handle tcb, std::string detail);

    [[noreturn]] void panic(PanicReason reason, const std::string& detail) const;

private:
    std::uint32_t ld(std::uint32_t addr) const;
    void st(std::uint32_t addr, std::uint32_t value);
    std::uint8_t ld8(std::uint32_t addr) const;
    void st8(std::uint32_t addr, std::uint8_t value);

    Handle expect(Handle raw, ObjectKind kind, const char* what) const;
    Handle expect_item(Handle raw, const char* what) const;
    Handle expect_full_item(Handle raw, const char* what) const;
    Handle owner_tcb(Handle item) const;
    Handle ready_list(std::uint32_t priority) const;
    Handle current() const;

    void add_to_ready(Handle tcb);
    Handle next_owner(Handle list);
    void increment_tick(std::uint32_t by);
    void unblock_due(std::uint32_t now);
    void reset_next_unblock();
    void resume_all();
    void wake_timer_daemon();
    void insert_timer(Handle timer, std::uint32_t expiry);
    void fire_timer(Handle item);
    void switch_timer_lists();
    void save_context(Handle tcb);
    void restore_context(Handle tcb);
    void free_task(Handle tcb);
    std::uint32_t allocate_list(const std::string& name, const std::optional<std::string>& parent);

    KernelConfig config_;
    KernelImage image_;
    std::array<std::uint32_t, kVarCount> var_addr_{};
    std::array<std::uint32_t, kKListCount> list_addr_{};
    std::uint32_t ready_base_ = 0;
    std::uint32_t last_time_addr_ = 0;
    Handle idle_tcb_ = 0;
    Handle timer_tcb_ = 0;

    struct TaskSlot {
        std::string record;
        TaskRole role = TaskRole::user;
        std::unique_ptr<TaskBody> body;
        TaskFeatures features;
    };
    std::map<Handle, TaskSlot> tasks_;
    std::map<Handle, std::string> timers_;
    std::uint32_t list_items_allocated_ = 0;

    std::uint32_t clock_ = 0;
    bool shutdown_ = false;
    std::uint32_t timer_fires_ = 0;
    EventRecording recording_ = EventRecording::full;
    std::vector<KernelEvent> events_;
    Fnv64 event_hash_;
};

}  // namespace kronos
