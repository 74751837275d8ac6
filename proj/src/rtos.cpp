#include "kronos/rtos.hpp"

#include <cstdio>
#include <utility>

namespace kronos {

using namespace layout;

namespace {

constexpr std::uint32_t kCmdStart = 1;
constexpr std::uint32_t kCmdStop = 2;

std::string hex(std::uint32_t v) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "0x%08x", v);
    return buf;
}

}  // namespace

const char* var_name(Var v) {
    static constexpr const char* kNames[] = {
        "uxCurrentNumberOfTasks", "uxDeletedTasksWaitingCleanup", "xPendedTicks", "uxTaskNumber",
        "uxTopReadyPriority", "xNextTaskUnblockTime", "xTickCount", "xNumOfOverflows",
        "xSchedulerRunning", "xTimerQueue", "xTimerTaskHandle", "xYieldPending",
        "pxCurrentTCB", "pxCurrentTimerList", "pxDelayedTaskList", "pxOverflowDelayedTaskList",
        "pxOverflowTimerList", "xIdleTaskHandle",
    };
    static_assert(std::size(kNames) == kVarCount);
    return kNames[static_cast<std::size_t>(v)];
}

const char* list_name(KList l) {
    static constexpr const char* kNames[] = {
        "xDelayedTaskList1", "xDelayedTaskList2", "xPendingReadyList", "xActiveTimerList1",
        "xActiveTimerList2", "xSuspendedTaskList", "xTasksWaitingTermination",
    };
    static_assert(std::size(kNames) == kKListCount);
    return kNames[static_cast<std::size_t>(l)];
}

const char* to_string(PanicReason reason) {
    switch (reason) {
        case PanicReason::invalid_handle: return "invalid_handle";
        case PanicReason::unmapped_access: return "unmapped_access";
        case PanicReason::traversal_overrun: return "traversal_overrun";
        case PanicReason::stack_overflow: return "stack_overflow";
        case PanicReason::assertion: return "assertion";
    }
    return "?";
}

std::optional<PanicReason> parse_panic_reason(std::string_view text) {
    for (auto r : {PanicReason::invalid_handle, PanicReason::unmapped_access, PanicReason::traversal_overrun,
                   PanicReason::stack_overflow, PanicReason::assertion}) {
        if (text == to_string(r)) return r;
    }
    return std::nullopt;
}

KernelPanic::KernelPanic(PanicReason reason, std::uint32_t tick, std::string detail)
    : std::runtime_error(std::string("kernel panic (") + to_string(reason) + ") at tick " +
                         std::to_string(tick) + ": " + detail),
      reason_(reason),
      tick_(tick),
      detail_(std::move(detail)) {}

const char* to_string(EventKind kind) {
    switch (kind) {
        case EventKind::task_switch_in: return "task_switch_in";
        case EventKind::task_switch_out: return "task_switch_out";
        case EventKind::task_create: return "task_create";
        case EventKind::task_delete: return "task_delete";
        case EventKind::tick_overflow: return "tick_overflow";
        case EventKind::timer_fire: return "timer_fire";
        case EventKind::shutdown: return "shutdown";
    }
    return "?";
}

std::optional<EventKind> parse_event_kind(std::string_view text) {
    for (auto k : {EventKind::task_switch_in, EventKind::task_switch_out, EventKind::task_create,
                   EventKind::task_delete, EventKind::tick_overflow, EventKind::timer_fire, EventKind::shutdown}) {
        if (text == to_string(k)) return k;
    }
    return std::nullopt;
}

std::string KernelEvent::format() const {
    std::string line = "tick=" + std::to_string(tick) + " kind=" + to_string(kind) + " task=" + task +
                       " detail=" + detail;
    return line;
}

std::optional<KernelEvent> KernelEvent::parse(std::string_view line) {
    auto field = [&](std::string_view key, std::string_view& rest) -> std::optional<std::string_view> {
        if (!rest.starts_with(key)) return std::nullopt;
        rest.remove_prefix(key.size());
        const auto sp = rest.find(' ');
        auto value = rest.substr(0, sp);
        rest = sp == std::string_view::npos ? std::string_view{} : rest.substr(sp + 1);
        return value;
    };
    std::string_view rest = line;
    auto tick = field("tick=", rest);
    auto kind = field("kind=", rest);
    auto task = field("task=", rest);
    if (!tick || !kind || !task || !rest.starts_with("detail=")) return std::nullopt;
    KernelEvent e;
    try {
        e.tick = static_cast<std::uint32_t>(std::stoul(std::string(*tick)));
    } catch (const std::exception&) {
        return std::nullopt;
    }
    auto k = parse_event_kind(*kind);
    if (!k) return std::nullopt;
    e.kind = *k;
    e.task = std::string(*task);
    e.detail = std::string(rest.substr(7));
    return e;
}

// ---------------------------------------------------------------------------

Kernel::Kernel(KernelConfig config) : config_(config), image_(config.image_capacity) {
    if (config_.priorities == 0 || config_.priorities > 7) {
        throw std::invalid_argument("priority levels must be in [1, 7], got " + std::to_string(config_.priorities));
    }
    if (config_.tick_rate_hz == 0) throw std::invalid_argument("tick rate must be positive");

    for (std::size_t i = 0; i < kVarCount; ++i) {
        const auto v = static_cast<Var>(i);
        const bool is_handle = i >= kScalarVarCount || v == Var::xTimerQueue || v == Var::xTimerTaskHandle;
        var_addr_[i] = image_.allocate(var_name(v), 4, is_handle ? ObjectKind::handle : ObjectKind::scalar);
    }
    for (std::uint32_t p = 0; p < config_.priorities; ++p) {
        const auto addr = allocate_list("pxReadyTasksLists[" + std::to_string(p) + "]", "pxReadyTasksLists");
        if (p == 0) ready_base_ = addr;
    }
    for (std::size_t i = 0; i < kKListCount; ++i) {
        list_addr_[i] = allocate_list(list_name(static_cast<KList>(i)), std::nullopt);
    }
    last_time_addr_ = image_.allocate("xLastTime", 4, ObjectKind::scalar, std::string("timers"));
    const auto queue = image_.allocate("xTimerQueueStorage", kQueueSize, ObjectKind::queue, std::string("timers"));
    st(queue + kQueueLength, kQueueCapacity);
    st(queue + kQueueItemSize, kQueueEntry);

    set_var(Var::pxDelayedTaskList, list_address(KList::xDelayedTaskList1));
    set_var(Var::pxOverflowDelayedTaskList, list_address(KList::xDelayedTaskList2));
    set_var(Var::pxCurrentTimerList, list_address(KList::xActiveTimerList1));
    set_var(Var::pxOverflowTimerList, list_address(KList::xActiveTimerList2));
    set_var(Var::xTimerQueue, queue);
    set_var(Var::xNextTaskUnblockTime, kMaxDelay);

    idle_tcb_ = task_create("IDLE", 0, config_.idle_stack_words, nullptr, TaskRole::idle);
    set_var(Var::xIdleTaskHandle, idle_tcb_);
    timer_tcb_ = task_create("TmrSvc", config_.priorities - 1, config_.timer_stack_words, nullptr,
                             TaskRole::timer_daemon);
    set_var(Var::xTimerTaskHandle, timer_tcb_);
}

std::uint32_t Kernel::allocate_list(const std::string& name, const std::optional<std::string>& parent) {
    const auto base = image_.allocate(name, kListSize, ObjectKind::list, parent);
    image_.add_child(name + ".xListEnd", name, base + kListEnd, kMiniItemSize, ObjectKind::list_item);
    ++list_items_allocated_;
    list_init(base);
    return base;
}

std::uint32_t Kernel::var(Var v) const { return image_.read_field(var_address(v), 4); }
void Kernel::set_var(Var v, std::uint32_t value) { image_.write_field(var_address(v), 4, value); }

void Kernel::panic(PanicReason reason, const std::string& detail) const {
    throw KernelPanic(reason, clock_, detail);
}

void Kernel::require(bool condition, const std::string& what) const {
    if (!condition) panic(PanicReason::assertion, what);
}

std::uint32_t Kernel::ld(std::uint32_t addr) const {
    if (!image_.in_range(addr, 4)) panic(PanicReason::unmapped_access, "read at " + hex(addr));
    return image_.read_field(addr, 4);
}

void Kernel::st(std::uint32_t addr, std::uint32_t value) {
    if (!image_.in_range(addr, 4)) panic(PanicReason::unmapped_access, "write at " + hex(addr));
    image_.write_field(addr, 4, value);
}

std::uint8_t Kernel::ld8(std::uint32_t addr) const {
    if (!image_.in_range(addr, 1)) panic(PanicReason::unmapped_access, "read at " + hex(addr));
    return image_.read_byte(addr);
}

void Kernel::st8(std::uint32_t addr, std::uint8_t value) {
    if (!image_.in_range(addr, 1)) panic(PanicReason::unmapped_access, "write at " + hex(addr));
    image_.write_byte(addr, value);
}

Handle Kernel::expect(Handle raw, ObjectKind kind, const char* what) const {
    if (!image_.valid_handle(raw, kind)) {
        panic(PanicReason::invalid_handle,
              std::string(what) + " = " + hex(raw) + " is not a live " + to_string(kind));
    }
    return raw;
}

Handle Kernel::expect_item(Handle raw, const char* what) const { return expect(raw, ObjectKind::list_item, what); }

Handle Kernel::expect_full_item(Handle raw, const char* what) const {
    const auto* rec = image_.record_at(raw, ObjectKind::list_item);
    if (!rec) panic(PanicReason::invalid_handle, std::string(what) + " = " + hex(raw) + " is not a list item");
    if (rec->size != kListItemSize) {
        panic(PanicReason::invalid_handle, std::string(what) + " = " + hex(raw) + " is a list end marker");
    }
    return raw;
}

Handle Kernel::owner_tcb(Handle item) const {
    expect_full_item(item, "list entry");
    return expect(ld(item + kItemOwner), ObjectKind::tcb, "list entry owner");
}

Handle Kernel::ready_list(std::uint32_t priority) const {
    return expect(ready_list_address(priority), ObjectKind::list, "pxReadyTasksLists[uxPriority]");
}

Handle Kernel::current() const { return expect(var(Var::pxCurrentTCB), ObjectKind::tcb, "pxCurrentTCB"); }

std::uint32_t Kernel::traversal_budget() const {
    return config_.traversal_budget_factor * list_items_allocated_;
}

// -- lists -------------------------------------------------------------------

void Kernel::list_init(Handle list) {
    expect(list, ObjectKind::list, "list");
    const auto end = list + kListEnd;
    st(list + kListCount, 0);
    st(list + kListIndex, end);
    st(end + kItemValue, kMaxDelay);
    st(end + kItemNext, end);
    st(end + kItemPrev, end);
}

void Kernel::list_insert_end(Handle list, Handle item) {
    expect(list, ObjectKind::list, "list");
    expect_full_item(item, "inserted item");
    const auto index = expect_item(ld(list + kListIndex), "pxIndex");
    const auto prev = expect_item(ld(index + kItemPrev), "pxIndex->pxPrevious");
    st(item + kItemNext, index);
    st(item + kItemPrev, prev);
    st(prev + kItemNext, item);
    st(index + kItemPrev, item);
    st(item + kItemContainer, list);
    st(list + kListCount, ld(list + kListCount) + 1);
}

void Kernel::list_insert_ordered(Handle list, Handle item) {
    expect(list, ObjectKind::list, "list");
    expect_full_item(item, "inserted item");
    const auto value = ld(item + kItemValue);
    const auto end = list + kListEnd;
    Handle iter = end;
    if (value == kMaxDelay) {
        iter = expect_item(ld(end + kItemPrev), "xListEnd.pxPrevious");
    } else {
        const auto budget = traversal_budget();
        for (std::uint32_t steps = 0;; ++steps) {
            if (steps > budget) panic(PanicReason::traversal_overrun, "ordered insert into " + hex(list));
            const auto next = expect_item(ld(iter + kItemNext), "pxNext");
            if (ld(next + kItemValue) > value) break;
            iter = next;
        }
    }
    const auto next = expect_item(ld(iter + kItemNext), "pxNext");
    st(item + kItemNext, next);
    st(next + kItemPrev, item);
    st(item + kItemPrev, iter);
    st(iter + kItemNext, item);
    st(item + kItemContainer, list);
    st(list + kListCount, ld(list + kListCount) + 1);
}

std::uint32_t Kernel::list_remove(Handle item) {
    expect_full_item(item, "removed item");
    const auto list = expect(ld(item + kItemContainer), ObjectKind::list, "pvContainer");
    const auto next = expect_item(ld(item + kItemNext), "pxNext");
    const auto prev = expect_item(ld(item + kItemPrev), "pxPrevious");
    st(next + kItemPrev, prev);
    st(prev + kItemNext, next);
    if (ld(list + kListIndex) == item) st(list + kListIndex, prev);
    st(item + kItemContainer, 0);
    const auto remaining = ld(list + kListCount) - 1;
    st(list + kListCount, remaining);
    return remaining;
}

std::vector<Handle> Kernel::list_items(Handle list) const {
    expect(list, ObjectKind::list, "list");
    const auto end = list + kListEnd;
    const auto budget = traversal_budget();
    std::vector<Handle> out;
    auto it = expect_item(ld(end + kItemNext), "xListEnd.pxNext");
    while (it != end) {
        if (out.size() >= budget) panic(PanicReason::traversal_overrun, "walking list " + hex(list));
        expect_full_item(it, "list entry");
        if (ld(it + kItemContainer) != list) {
            panic(PanicReason::assertion, "item " + hex(it) + " in list " + hex(list) + " has foreign container");
        }
        out.push_back(it);
        it = expect_item(ld(it + kItemNext), "pxNext");
    }
    if (out.size() != ld(list + kListCount)) {
        panic(PanicReason::assertion, "list " + hex(list) + " holds " + std::to_string(out.size()) +
                                          " items but uxNumberOfItems = " + std::to_string(ld(list + kListCount)));
    }
    return out;
}

Handle Kernel::next_owner(Handle list) {
    const auto end = list + kListEnd;
    const auto index = expect_item(ld(list + kListIndex), "pxIndex");
    auto next = expect_item(ld(index + kItemNext), "pxIndex->pxNext");
    if (next == end) next = expect_item(ld(next + kItemNext), "xListEnd.pxNext");
    st(list + kListIndex, next);
    return owner_tcb(next);
}

// -- tasks -------------------------------------------------------------------

Handle Kernel::task_create(const std::string& name, std::uint32_t priority, std::uint32_t stack_words,
                           std::unique_ptr<TaskBody> body, TaskRole role) {
    if (priority >= config_.priorities) {
        throw std::invalid_argument("task '" + name + "' priority " + std::to_string(priority) + " >= " +
                                    std::to_string(config_.priorities));
    }
    const std::uint32_t stack_bytes = stack_words * 4;
    if (stack_bytes < 4 * kContextFrame) throw std::invalid_argument("stack of task '" + name + "' too small");

    const std::string rec = "tcb:" + name;
    const auto tcb = image_.allocate(rec, kTcbSize, ObjectKind::tcb);
    image_.add_child(rec + ".xStateListItem", rec, tcb + kStateItem, kListItemSize, ObjectKind::list_item);
    image_.add_child(rec + ".xEventListItem", rec, tcb + kEventItem, kListItemSize, ObjectKind::list_item);
    image_.add_child(rec + ".pcTaskName", rec, tcb + kTaskName, kTaskNameLen, ObjectKind::name_string);
    const auto stack = image_.allocate("stack:" + name, stack_bytes, ObjectKind::stack, rec);
    list_items_allocated_ += 2;

    for (std::uint32_t i = 0; i < kTaskNameLen; ++i) {
        st8(tcb + kTaskName + i, i + 1 < kTaskNameLen && i < name.size() ? static_cast<std::uint8_t>(name[i]) : 0);
    }
    for (std::uint32_t w = 0; w < stack_bytes; w += 4) st(stack + w, kStackFill);
    const auto frame = stack + stack_bytes - 2 * kContextFrame;
    st(frame, tcb);
    st(frame + 4, 0);
    st(frame + 8, kStackFill);
    st(frame + 12, ~kStackFill);
    st(tcb + kTopOfStack, frame);
    st(tcb + kStack, stack);

    st(tcb + kStateItem + kItemOwner, tcb);
    st(tcb + kEventItem + kItemOwner, tcb);
    st(tcb + kEventItem + kItemValue, config_.priorities - priority);
    st(tcb + kPriority, priority);
    st(tcb + kBasePriority, priority);

    const auto number = var(Var::uxTaskNumber) + 1;
    set_var(Var::uxTaskNumber, number);
    st(tcb + kTcbNumber, number);
    set_var(Var::uxCurrentNumberOfTasks, var(Var::uxCurrentNumberOfTasks) + 1);

    const auto cur = var(Var::pxCurrentTCB);
    if (cur == 0 || (var(Var::xSchedulerRunning) == 0 && ld(cur + kPriority) <= priority)) {
        set_var(Var::pxCurrentTCB, tcb);
    }
    add_to_ready(tcb);
    tasks_.emplace(tcb, TaskSlot{rec, role, std::move(body), {}});
    emit(EventKind::task_create, tcb, "prio=" + std::to_string(priority));
    return tcb;
}

void Kernel::add_to_ready(Handle tcb) {
    const auto priority = ld(tcb + kPriority);
    list_insert_end(ready_list(priority), tcb + kStateItem);
    if (priority > var(Var::uxTopReadyPriority)) set_var(Var::uxTopReadyPriority, priority);
}

void Kernel::start_scheduler() {
    set_var(Var::xNextTaskUnblockTime, kMaxDelay);
    set_var(Var::xTickCount, 0);
    st(last_time_addr_, 0);
    set_var(Var::xSchedulerRunning, 1);
    const auto first = current();
    restore_context(first);
    emit(EventKind::task_switch_in, first, "prio=" + std::to_string(ld(first + kPriority)));
}

void Kernel::save_context(Handle tcb) {
    const auto top = ld(tcb + kTopOfStack);
    const auto stack = ld(tcb + kStack);
    if (top < kContextFrame || top - kContextFrame < stack) {
        panic(PanicReason::stack_overflow, "pxTopOfStack " + hex(top) + " below pxStack " + hex(stack));
    }
    const auto frame = top - kContextFrame;
    st(frame, tcb);
    st(frame + 4, ld(tcb + kRunTimeCounter));
    st(frame + 8, kStackFill);
    st(frame + 12, ~kStackFill);
    st(tcb + kTopOfStack, frame);
}

void Kernel::restore_context(Handle tcb) {
    const auto top = ld(tcb + kTopOfStack);
    if (ld(top) != tcb) panic(PanicReason::assertion, "context frame at " + hex(top) + " does not belong to task");
    st(tcb + kTopOfStack, top + kContextFrame);
}

Handle Kernel::schedule_next() {
    require(var(Var::xSchedulerRunning) != 0, "context switch while scheduler is not running");
    set_var(Var::xYieldPending, 0);
    const auto cur = current();
    save_context(cur);
    emit(EventKind::task_switch_out, cur, {});

    auto priority = var(Var::uxTopReadyPriority);
    Handle list = 0;
    for (;;) {
        list = ready_list(priority);
        if (ld(list + kListCount) != 0) break;
        require(priority != 0, "no ready task at any priority");
        --priority;
    }
    const auto next = next_owner(list);
    set_var(Var::pxCurrentTCB, next);
    set_var(Var::uxTopReadyPriority, priority);
    restore_context(next);
    emit(EventKind::task_switch_in, next, "prio=" + std::to_string(priority));
    return next;
}

void Kernel::run_slice() {
    const auto cur = current();
    st(cur + kRunTimeCounter, ld(cur + kRunTimeCounter) + 1);
    const auto it = tasks_.find(cur);
    if (it == tasks_.end()) panic(PanicReason::invalid_handle, "no task code for TCB " + hex(cur));
    switch (it->second.role) {
        case TaskRole::idle:
            if (idle_step() == IdleVerdict::shutdown) {
                shutdown_ = true;
                emit(EventKind::shutdown, cur, "graceful");
            }
            return;
        case TaskRole::timer_daemon:
            timer_daemon_step();
            return;
        case TaskRole::user: break;
    }
    const auto result = it->second.body->run_slice(*this);
    switch (result.action) {
        case SliceAction::yield: break;
        case SliceAction::delay: task_delay(result.delay_ticks); break;
        case SliceAction::done: task_delete_self(); break;
    }
}

void Kernel::task_delete_self() {
    const auto cur = current();
    const auto priority = ld(cur + kPriority);
    require(ld(cur + kStateItem + kItemContainer) == ready_list_address(priority),
            "running task is not in the ready list of its priority");
    list_remove(cur + kStateItem);
    if (ld(cur + kEventItem + kItemContainer) != 0) list_remove(cur + kEventItem);
    set_var(Var::uxTaskNumber, var(Var::uxTaskNumber) + 1);
    list_insert_end(list_address(KList::xTasksWaitingTermination), cur + kStateItem);
    set_var(Var::uxDeletedTasksWaitingCleanup, var(Var::uxDeletedTasksWaitingCleanup) + 1);
    emit(EventKind::task_delete, cur, {});
}

void Kernel::task_delay(std::uint32_t ticks) {
    const auto cur = current();
    const auto now = var(Var::xTickCount);
    list_remove(cur + kStateItem);
    const auto wake = now + ticks;
    st(cur + kStateItem + kItemValue, wake);
    if (wake < now) {
        list_insert_ordered(expect(var(Var::pxOverflowDelayedTaskList), ObjectKind::list, "pxOverflowDelayedTaskList"),
                            cur + kStateItem);
    } else {
        list_insert_ordered(expect(var(Var::pxDelayedTaskList), ObjectKind::list, "pxDelayedTaskList"),
                            cur + kStateItem);
        if (wake < var(Var::xNextTaskUnblockTime)) set_var(Var::xNextTaskUnblockTime, wake);
    }
    resume_all();
}

void Kernel::resume_all() {
    const auto pending = list_address(KList::xPendingReadyList);
    const auto budget = traversal_budget();
    for (std::uint32_t steps = 0; ld(pending + kListCount) != 0; ++steps) {
        if (steps > budget) panic(PanicReason::traversal_overrun, "draining xPendingReadyList");
        const auto item = expect_full_item(ld(pending + kListEnd + kItemNext), "xPendingReadyList head");
        const auto tcb = owner_tcb(item);
        list_remove(item);
        add_to_ready(tcb);
    }
    const auto pended = var(Var::xPendedTicks);
    if (pended != 0) {
        increment_tick(pended);
        set_var(Var::xPendedTicks, 0);
    }
}

// -- time --------------------------------------------------------------------

void Kernel::increment_tick(std::uint32_t by) {
    const auto old = var(Var::xTickCount);
    const auto now = old + by;
    set_var(Var::xTickCount, now);
    if (now < old) {
        const auto delayed = expect(var(Var::pxDelayedTaskList), ObjectKind::list, "pxDelayedTaskList");
        require(ld(delayed + kListCount) == 0, "delayed list not empty at tick overflow");
        const auto overflow =
            expect(var(Var::pxOverflowDelayedTaskList), ObjectKind::list, "pxOverflowDelayedTaskList");
        set_var(Var::pxDelayedTaskList, overflow);
        set_var(Var::pxOverflowDelayedTaskList, delayed);
        set_var(Var::xNumOfOverflows, var(Var::xNumOfOverflows) + 1);
        reset_next_unblock();
        emit(EventKind::tick_overflow, 0, "overflows=" + std::to_string(var(Var::xNumOfOverflows)));
    }
    if (now >= var(Var::xNextTaskUnblockTime)) unblock_due(now);
}

void Kernel::reset_next_unblock() {
    const auto list = expect(var(Var::pxDelayedTaskList), ObjectKind::list, "pxDelayedTaskList");
    if (ld(list + kListCount) == 0) {
        set_var(Var::xNextTaskUnblockTime, kMaxDelay);
    } else {
        const auto head = expect_full_item(ld(list + kListEnd + kItemNext), "delayed list head");
        set_var(Var::xNextTaskUnblockTime, ld(head + kItemValue));
    }
}

void Kernel::unblock_due(std::uint32_t now) {
    const auto list = expect(var(Var::pxDelayedTaskList), ObjectKind::list, "pxDelayedTaskList");
    const auto budget = traversal_budget();
    for (std::uint32_t steps = 0;; ++steps) {
        if (steps > budget) panic(PanicReason::traversal_overrun, "unblocking delayed tasks");
        if (ld(list + kListCount) == 0) {
            set_var(Var::xNextTaskUnblockTime, kMaxDelay);
            return;
        }
        const auto item = expect_full_item(ld(list + kListEnd + kItemNext), "delayed list head");
        const auto wake = ld(item + kItemValue);
        if (now < wake) {
            set_var(Var::xNextTaskUnblockTime, wake);
            return;
        }
        const auto tcb = owner_tcb(item);
        list_remove(item);
        add_to_ready(tcb);
        set_var(Var::xYieldPending, 1);
    }
}

void Kernel::tick_advance() {
    increment_tick(1);
    const auto now = var(Var::xTickCount);
    const auto timers = expect(var(Var::pxCurrentTimerList), ObjectKind::list, "pxCurrentTimerList");
    bool due = now < ld(last_time_addr_);
    if (!due && ld(timers + kListCount) != 0) {
        const auto head = expect_full_item(ld(timers + kListEnd + kItemNext), "timer list head");
        due = ld(head + kItemValue) <= now;
    }
    if (due) wake_timer_daemon();
}

// -- timers ------------------------------------------------------------------

Handle Kernel::timer_create(const std::string& name, std::uint32_t period, bool auto_reload) {
    if (period == 0) throw std::invalid_argument("timer '" + name + "' period must be positive");
    const std::string rec = "timer:" + name;
    const auto timer = image_.allocate(rec, kTimerSize, ObjectKind::timer, std::string("timers"));
    image_.add_child(rec + ".xTimerListItem", rec, timer + kTimerItem, kListItemSize, ObjectKind::list_item);
    ++list_items_allocated_;
    st(timer + kTimerPeriod, period);
    st(timer + kTimerAutoReload, auto_reload ? 1 : 0);
    st(timer + kTimerCallback, 1);
    st(timer + kTimerItem + kItemOwner, timer);
    timers_.emplace(timer, name);
    return timer;
}

void Kernel::timer_start(Handle timer) {
    expect(timer, ObjectKind::timer, "timer");
    const auto queue = expect(var(Var::xTimerQueue), ObjectKind::queue, "xTimerQueue");
    const auto waiting = ld(queue + kQueueWaiting);
    require(waiting < kQueueCapacity, "timer command queue full");
    const auto write = ld(queue + kQueueWrite);
    require(write < kQueueCapacity, "timer queue write index out of range");
    const auto entry = queue + kQueueStorage + write * kQueueEntry;
    st(entry, kCmdStart);
    st(entry + 4, timer);
    st(queue + kQueueWrite, (write + 1) % kQueueCapacity);
    st(queue + kQueueWaiting, waiting + 1);
    wake_timer_daemon();
}

void Kernel::wake_timer_daemon() {
    const auto daemon = expect(var(Var::xTimerTaskHandle), ObjectKind::tcb, "xTimerTaskHandle");
    const auto item = daemon + kStateItem;
    if (ld(item + kItemContainer) == list_address(KList::xSuspendedTaskList)) {
        list_remove(item);
        add_to_ready(daemon);
    }
}

void Kernel::insert_timer(Handle timer, std::uint32_t expiry) {
    const auto item = timer + kTimerItem;
    const auto now = var(Var::xTickCount);
    st(item + kItemValue, expiry);
    if (expiry < now) {
        list_insert_ordered(expect(var(Var::pxOverflowTimerList), ObjectKind::list, "pxOverflowTimerList"), item);
    } else {
        list_insert_ordered(expect(var(Var::pxCurrentTimerList), ObjectKind::list, "pxCurrentTimerList"), item);
    }
}

void Kernel::fire_timer(Handle item) {
    expect_full_item(item, "timer list entry");
    const auto timer = expect(ld(item + kItemOwner), ObjectKind::timer, "timer list entry owner");
    const auto expiry = ld(item + kItemValue);
    list_remove(item);
    ++timer_fires_;
    const auto name = timers_.find(timer);
    emit(EventKind::timer_fire, var(Var::pxCurrentTCB), name == timers_.end() ? "?" : name->second);
    if (ld(timer + kTimerAutoReload) != 0) {
        const auto reload = expiry + ld(timer + kTimerPeriod);
        st(item + kItemValue, reload);
        const auto target = reload < expiry ? var(Var::pxOverflowTimerList) : var(Var::pxCurrentTimerList);
        list_insert_ordered(expect(target, ObjectKind::list, "active timer list"), item);
    }
}

void Kernel::switch_timer_lists() {
    const auto budget = traversal_budget();
    for (std::uint32_t steps = 0;; ++steps) {
        if (steps > budget) panic(PanicReason::traversal_overrun, "switching timer lists");
        const auto list = expect(var(Var::pxCurrentTimerList), ObjectKind::list, "pxCurrentTimerList");
        if (ld(list + kListCount) == 0) break;
        const auto head = expect_full_item(ld(list + kListEnd + kItemNext), "timer list head");
        const auto timer = expect(ld(head + kItemOwner), ObjectKind::timer, "timer list entry owner");
        list_remove(head);
        ++timer_fires_;
        emit(EventKind::timer_fire, var(Var::pxCurrentTCB), timers_.count(timer) ? timers_.at(timer) : "?");
        if (ld(timer + kTimerAutoReload) != 0) {
            st(head + kItemValue, ld(head + kItemValue) + ld(timer + kTimerPeriod));
            list_insert_ordered(expect(var(Var::pxOverflowTimerList), ObjectKind::list, "pxOverflowTimerList"),
                                head);
        }
    }
    const auto cur = var(Var::pxCurrentTimerList);
    set_var(Var::pxCurrentTimerList, var(Var::pxOverflowTimerList));
    set_var(Var::pxOverflowTimerList, cur);
}

void Kernel::timer_daemon_step() {
    const auto queue = expect(var(Var::xTimerQueue), ObjectKind::queue, "xTimerQueue");
    for (std::uint32_t processed = 0;; ++processed) {
        const auto waiting = ld(queue + kQueueWaiting);
        if (waiting == 0) break;
        require(processed < kQueueCapacity, "timer queue holds more commands than its capacity");
        const auto read = ld(queue + kQueueRead);
        require(read < kQueueCapacity, "timer queue read index out of range");
        const auto entry = queue + kQueueStorage + read * kQueueEntry;
        const auto command = ld(entry);
        const auto timer = ld(entry + 4);
        st(queue + kQueueRead, (read + 1) % kQueueCapacity);
        st(queue + kQueueWaiting, waiting - 1);
        expect(timer, ObjectKind::timer, "timer command target");
        const auto item = timer + kTimerItem;
        if (command == kCmdStart) {
            if (ld(item + kItemContainer) != 0) list_remove(item);
            insert_timer(timer, var(Var::xTickCount) + ld(timer + kTimerPeriod));
        } else if (command == kCmdStop) {
            if (ld(item + kItemContainer) != 0) list_remove(item);
        } else {
            panic(PanicReason::assertion, "unknown timer command " + std::to_string(command));
        }
    }

    const auto now = var(Var::xTickCount);
    if (now < ld(last_time_addr_)) switch_timer_lists();
    st(last_time_addr_, now);

    const auto budget = traversal_budget();
    for (std::uint32_t steps = 0;; ++steps) {
        if (steps > budget) panic(PanicReason::traversal_overrun, "processing expired timers");
        const auto list = expect(var(Var::pxCurrentTimerList), ObjectKind::list, "pxCurrentTimerList");
        if (ld(list + kListCount) == 0) break;
        const auto head = expect_full_item(ld(list + kListEnd + kItemNext), "timer list head");
        if (ld(head + kItemValue) > now) break;
        fire_timer(head);
    }

    // Block on the command queue until a command arrives or a timer expires.
    const auto self = current();
    list_remove(self + kStateItem);
    list_insert_end(list_address(KList::xSuspendedTaskList), self + kStateItem);
}

// -- idle --------------------------------------------------------------------

IdleVerdict Kernel::idle_step() {
    const auto idle = var(Var::xIdleTaskHandle);
    require(idle == var(Var::pxCurrentTCB), "idle hook running outside the idle task");

    if (var(Var::uxDeletedTasksWaitingCleanup) > 0) {
        const auto term = list_address(KList::xTasksWaitingTermination);
        const auto item = expect_item(ld(term + kListEnd + kItemNext), "xTasksWaitingTermination head");
        if (item == term + kListEnd) {
            panic(PanicReason::invalid_handle, "cleanup requested but xTasksWaitingTermination is empty");
        }
        const auto tcb = owner_tcb(item);
        list_remove(item);
        set_var(Var::uxCurrentNumberOfTasks, var(Var::uxCurrentNumberOfTasks) - 1);
        set_var(Var::uxDeletedTasksWaitingCleanup, var(Var::uxDeletedTasksWaitingCleanup) - 1);
        free_task(tcb);
    }
    if (var(Var::uxDeletedTasksWaitingCleanup) != 0) return IdleVerdict::keep_running;

    const auto daemon = var(Var::xTimerTaskHandle);
    std::vector<Handle> lists;
    for (std::uint32_t p = 0; p < config_.priorities; ++p) lists.push_back(ready_list(p));
    lists.push_back(expect(var(Var::pxDelayedTaskList), ObjectKind::list, "pxDelayedTaskList"));
    lists.push_back(expect(var(Var::pxOverflowDelayedTaskList), ObjectKind::list, "pxOverflowDelayedTaskList"));
    lists.push_back(list_address(KList::xPendingReadyList));
    lists.push_back(list_address(KList::xSuspendedTaskList));
    lists.push_back(list_address(KList::xTasksWaitingTermination));
    for (const auto list : lists) {
        for (const auto item : list_items(list)) {
            const auto owner = owner_tcb(item);
            if (owner != idle && owner != daemon) return IdleVerdict::keep_running;
        }
    }
    return IdleVerdict::shutdown;
}

void Kernel::free_task(Handle tcb) {
    const auto it = tasks_.find(tcb);
    const auto stack = ld(tcb + kStack);
    const auto* rec = image_.record_at(stack, ObjectKind::stack);
    if (!rec) panic(PanicReason::invalid_handle, "pxStack = " + hex(stack) + " is not a live stack");
    if (it == tasks_.end() || !rec->parent || *rec->parent != it->second.record) {
        panic(PanicReason::assertion, "freeing a stack that does not belong to the task");
    }
    image_.release(it->second.record);
    tasks_.erase(it);
}

// -- services ----------------------------------------------------------------

void Kernel::mutex_take() {
    const auto cur = current();
    st(cur + kMutexesHeld, ld(cur + kMutexesHeld) + 1);
    tasks_[cur].features.mutex_used = true;
}

void Kernel::mutex_give() {
    const auto cur = current();
    const auto held = ld(cur + kMutexesHeld);
    require(held != 0, "mutex given by a task that holds none");
    st(cur + kMutexesHeld, held - 1);
    if (held - 1 == 0) {
        const auto priority = ld(cur + kPriority);
        const auto base = ld(cur + kBasePriority);
        if (priority != base) {
            list_remove(cur + kStateItem);
            st(cur + kPriority, base);
            add_to_ready(cur);
        }
    }
}

void Kernel::notify_self(std::uint32_t value) {
    const auto cur = current();
    st(cur + kNotifiedValue, value);
    st8(cur + kNotifyState, kNotifyReceived);
    tasks_[cur].features.notification_used = true;
}

std::uint32_t Kernel::notify_take() {
    const auto cur = current();
    require(ld8(cur + kNotifyState) == kNotifyReceived, "no notification pending");
    const auto value = ld(cur + kNotifiedValue);
    st8(cur + kNotifyState, kNotifyNotWaiting);
    return value;
}

void Kernel::set_task_tag(std::uint32_t tag) {
    const auto cur = current();
    st(cur + kTaskTag, tag);
    tasks_[cur].features.tag_set = true;
}

// -- introspection -------------------------------------------------------------

std::optional<Handle> Kernel::tcb_of(const std::string& task_name) const {
    const auto* rec = image_.find("tcb:" + task_name);
    if (!rec || !rec->live) return std::nullopt;
    return rec->base;
}

std::string Kernel::task_name(Handle tcb) const {
    if (!image_.valid_handle(tcb, ObjectKind::tcb)) return "?";
    std::string name;
    for (std::uint32_t i = 0; i < kTaskNameLen; ++i) {
        const auto c = image_.read_byte(tcb + kTaskName + i);
        if (c == 0) break;
        name.push_back(c > 0x20 && c < 0x7F ? static_cast<char>(c) : '?');
    }
    return name.empty() ? "?" : name;
}

std::optional<TaskRole> Kernel::role_of(Handle tcb) const {
    const auto it = tasks_.find(tcb);
    if (it == tasks_.end()) return std::nullopt;
    return it->second.role;
}

TaskFeatures Kernel::features(Handle tcb) const {
    const auto it = tasks_.find(tcb);
    return it == tasks_.end() ? TaskFeatures{} : it->second.features;
}

void Kernel::emit(EventKind kind, Handle tcb, std::string detail) {
    if (recording_ == EventRecording::none) return;
    KernelEvent e{clock_, kind, tcb == 0 ? std::string("-") : task_name(tcb), std::move(detail)};
    for (auto& c : e.detail) {
        if (c == '\n' || c == '\r') c = ' ';
    }
    event_hash_.update(e.format());
    event_hash_.update("\n");
    if (recording_ == EventRecording::full) events_.push_back(std::move(e));
}

}  // namespace kronos
