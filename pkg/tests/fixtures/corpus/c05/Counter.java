import java.util.List;

public class Counter {
    private int mTotal;

    public int count(List<String> items) {
        mTotal++;
        <start>return list.size();<end>
    }
}
