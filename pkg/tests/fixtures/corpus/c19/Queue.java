import java.util.ArrayList;
import java.util.List;

public class Queue {
    private List<String> mPending = new ArrayList<>();
    private int mCount;

    public void flush() {
        mPending.clear();
    }

    public void push(String job) {
        mCount++;
        <start>queue.add(item);<end>
    }
}
